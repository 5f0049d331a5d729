"""Train a small CNN on a folder-per-class image set and export fixtures.

Training recipe: momentum SGD (lr 0.01, momentum 0.9), StepLR decay 0.1
every 20 epochs, batch size 32, stratified 80/20 split per class. The
exported files (SWMF weights, SWDS validation set, raw .bin inputs) plus
a manifest recording top-1/3/5 accuracy and per-sample predictions are
the oracle values the inference toolkit's tests compare against.
"""

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torch import nn

from . import swformats as swf

ARCH_DEFAULT = {"widths": (16, 32, 32), "hidden": 64, "input_size": 32}


class ShapesNet(nn.Module):
    """conv/relu/pool blocks, then a two-layer head; mirrors the SWMF chain."""

    def __init__(self, widths, hidden, classes, input_size, in_channels=3):
        super().__init__()
        blocks = []
        c = in_channels
        size = input_size
        for n in widths:
            blocks += [nn.Conv2d(c, n, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2)]
            c = n
            size //= 2
        self.features = nn.Sequential(*blocks)
        self.flat_dim = c * size * size
        self.head = nn.Sequential(nn.Linear(self.flat_dim, hidden), nn.ReLU(),
                                  nn.Linear(hidden, classes))
        # relu-gain init escapes the uniform-logits plateau that the
        # torch default tends to sit on with momentum SGD at lr 0.01
        for mod in self.modules():
            if isinstance(mod, (nn.Conv2d, nn.Linear)):
                nn.init.kaiming_normal_(mod.weight, nonlinearity="relu")
                nn.init.zeros_(mod.bias)

    def forward(self, x):
        return self.head(torch.flatten(self.features(x), 1))


def load_image_dir(dataset_dir, input_size: int):
    """Folder-per-class images -> (inputs, labels, class names, decode failures)."""
    dataset_dir = Path(dataset_dir)
    classes = sorted(d.name for d in dataset_dir.iterdir() if d.is_dir())
    if len(classes) < 2:
        raise ValueError(f"need at least 2 class directories, found {classes}")
    xs, ys = [], []
    failures = 0
    for label, cls in enumerate(classes):
        for path in sorted((dataset_dir / cls).iterdir()):
            try:
                with Image.open(path) as img:
                    img = img.convert("RGB").resize((input_size, input_size))
            except (UnidentifiedImageError, OSError):
                failures += 1
                continue
            arr = np.asarray(img, dtype=np.float32) / 127.5 - 1.0  # mean-zero [-1,1]
            xs.append(arr.transpose(2, 0, 1))  # HWC -> CHW
            ys.append(label)
    return np.stack(xs), np.asarray(ys), classes, failures


def stratified_split(labels: np.ndarray, train_frac: float, seed: int):
    """Per-class shuffle + split; ratios land within one sample of the target."""
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        cut = int(round(train_frac * len(idx)))
        train_idx.extend(idx[:cut])
        val_idx.extend(idx[cut:])
    return np.asarray(sorted(train_idx)), np.asarray(sorted(val_idx))


def topk_correct(logits: np.ndarray, labels: np.ndarray, ks=(1, 3, 5)):
    counts = {k: 0 for k in ks}
    for row, label in zip(logits, labels):
        order = np.lexsort((np.arange(len(row)), -row.astype(np.float64)))
        for k in ks:
            if label in order[:k]:
                counts[k] += 1
    return counts


def train_model(net: ShapesNet, x_train, y_train, epochs: int, seed: int,
                lr=0.01, momentum=0.9, step_size=20, gamma=0.1, batch_size=32):
    torch.manual_seed(seed)
    opt = torch.optim.SGD(net.parameters(), lr=lr, momentum=momentum)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=step_size, gamma=gamma)
    loss_fn = nn.CrossEntropyLoss()
    xt = torch.from_numpy(x_train)
    yt = torch.from_numpy(y_train).long()
    order_rng = np.random.default_rng(seed)
    net.train()
    for _ in range(epochs):
        order = order_rng.permutation(len(xt))
        for start in range(0, len(xt), batch_size):
            idx = order[start : start + batch_size]
            opt.zero_grad()
            loss = loss_fn(net(xt[idx]), yt[idx])
            loss.backward()
            opt.step()
        sched.step()
    net.eval()
    return net


def export_model(net: ShapesNet, classes, path):
    """Serialize the torch net into the SWMF chain (softmax appended)."""
    model = swf.Model()
    conv_i = 0
    for mod in net.features:
        if isinstance(mod, nn.Conv2d):
            conv_i += 1
            model.conv(
                f"conv{conv_i}",
                mod.weight.detach().numpy(),
                mod.bias.detach().numpy(),
                stride=mod.stride[0],
                pad=mod.padding[0],
            )
        elif isinstance(mod, nn.ReLU):
            model.relu(f"relu{conv_i}")
        elif isinstance(mod, nn.MaxPool2d):
            k = mod.kernel_size if isinstance(mod.kernel_size, int) else mod.kernel_size[0]
            s = mod.stride if isinstance(mod.stride, int) else mod.stride[0]
            model.pool(f"pool{conv_i}", k, k, s)
    model.flatten()
    fc1, fc2 = [m for m in net.head if isinstance(m, nn.Linear)]
    model.linear("fc1", fc1.weight.detach().numpy(), fc1.bias.detach().numpy())
    model.relu("relu_fc1")
    model.linear("fc2", fc2.weight.detach().numpy(), fc2.bias.detach().numpy())
    model.softmax()
    swf.write_swmf(model, path)
    return model


def evaluate_logits(net: ShapesNet, x: np.ndarray) -> np.ndarray:
    net.eval()
    with torch.no_grad():
        return net(torch.from_numpy(x)).numpy()


def train_and_export(dataset_dir, out_dir, arch=None, epochs=30, seed=0,
                     sample_bins=3, train_frac=0.8):
    """Full pipeline: load, split, train, export model/valset/bins/manifest."""
    arch = dict(ARCH_DEFAULT, **(arch or {}))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    x, y, classes, failures = load_image_dir(dataset_dir, arch["input_size"])
    train_idx, val_idx = stratified_split(y, train_frac, seed)
    torch.manual_seed(seed)
    net = ShapesNet(arch["widths"], arch["hidden"], len(classes), arch["input_size"])
    train_model(net, x[train_idx], y[train_idx], epochs, seed)

    x_val, y_val = x[val_idx], y[val_idx]
    logits = evaluate_logits(net, x_val)
    counts = topk_correct(logits, y_val)
    n = len(y_val)

    export_model(net, classes, out_dir / "model.swmf")
    swf.write_swds(x_val, y_val, len(classes), out_dir / "val.swds")
    samples = []
    for i in range(min(sample_bins, n)):
        name = f"sample_{i:03d}.bin"
        swf.write_input_bin(x_val[i], out_dir / name)
        samples.append(
            {"file": name, "label": int(y_val[i]), "predicted": int(np.argmax(logits[i]))}
        )
    manifest = {
        "classes": classes,
        "seed": seed,
        "epochs": epochs,
        "arch": {k: (list(v) if isinstance(v, tuple) else v) for k, v in arch.items()},
        "train_samples": int(len(train_idx)),
        "sample_count": n,
        "decode_failures": failures,
        "top1": counts[1] / n,
        "top3": counts[3] / n,
        "top5": counts[5] / n,
        "preprocessing": "RGB, resize to input_size, scale to [-1,1], CHW float32",
        "samples": samples,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1)
    return manifest


def load_into_torch(swmf_path, classes: int) -> ShapesNet:
    """Rebuild a ShapesNet (possibly pruned widths) from an SWMF file."""
    model = swf.read_swmf(swmf_path)
    convs = [l for l in model.layers if l.kind == swf.KIND_CONV]
    linears = [l for l in model.layers if l.kind == swf.KIND_LINEAR]
    widths = tuple(l.params[0] for l in convs)
    hidden = linears[0].params[0]
    in_channels = convs[0].params[1]
    # recover the spatial input size from the flatten/linear constraint
    pools = sum(1 for l in model.layers if l.kind == swf.KIND_POOL)
    feat = linears[0].params[1] // widths[-1]
    side = int(round(feat ** 0.5)) << pools
    net = ShapesNet(widths, hidden, linears[-1].params[0], side, in_channels)
    with torch.no_grad():
        torch_convs = [m for m in net.features if isinstance(m, nn.Conv2d)]
        for mod, layer in zip(torch_convs, convs):
            mod.weight.copy_(torch.from_numpy(layer.weight))
            mod.bias.copy_(torch.from_numpy(layer.bias))
        torch_linears = [m for m in net.head if isinstance(m, nn.Linear)]
        for mod, layer in zip(torch_linears, linears):
            mod.weight.copy_(torch.from_numpy(layer.weight))
            mod.bias.copy_(torch.from_numpy(layer.bias))
    net.eval()
    return net


def fine_tune(pruned_swmf, dataset_dir, out_path, epochs=5, seed=0, arch=None,
              train_frac=0.8):
    """Recover accuracy of a pruned model with a short training run.

    epochs=0 re-exports the weights untouched (identity).
    """
    arch = dict(ARCH_DEFAULT, **(arch or {}))
    x, y, classes, _ = load_image_dir(dataset_dir, arch["input_size"])
    train_idx, val_idx = stratified_split(y, train_frac, seed)
    net = load_into_torch(pruned_swmf, len(classes))
    if epochs > 0:
        train_model(net, x[train_idx], y[train_idx], epochs, seed)
    export_model(net, classes, out_path)
    logits = evaluate_logits(net, x[val_idx])
    counts = topk_correct(logits, y[val_idx])
    n = len(val_idx)
    return {"top1": counts[1] / n, "top3": counts[3] / n, "top5": counts[5] / n,
            "sample_count": n}
