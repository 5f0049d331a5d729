"""Test-only network helpers: a bandwidth-throttled TCP relay."""

import socket
import threading
import time


def _sleep_until(deadline: float):
    """sleep() overshoots by ~1 ms on coarse-timer kernels; finish by spinning."""
    while True:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return
        if remaining > 0.005:
            time.sleep(remaining - 0.005)


class ThrottledProxy:
    """Relays one TCP connection at a time, pacing each direction to a
    fixed bandwidth (megabit = 10^6 bits, matching the latency model)."""

    CHUNK = 1 << 20

    def __init__(self, target_addr, mbps: float, listen=("127.0.0.1", 0)):
        self.target_addr = target_addr
        self.mbps = mbps
        self._listener = socket.create_server(listen)
        self._running = True
        self._threads = []
        self._socks = set()
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)

    @property
    def address(self):
        return self._listener.getsockname()

    def _accept_loop(self):
        while self._running:
            try:
                client, _ = self._listener.accept()
            except OSError:
                return
            try:
                upstream = socket.create_connection(self.target_addr, timeout=10)
            except OSError:
                client.close()
                continue
            for sock in (client, upstream):
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._socks.add(sock)
            for src, dst in ((client, upstream), (upstream, client)):
                t = threading.Thread(target=self._relay, args=(src, dst), daemon=True)
                t.start()
                self._threads.append(t)

    def _relay(self, src: socket.socket, dst: socket.socket):
        # serialization-delay pacing with no idle credit: a chunk finishes
        # transmitting len*8/rate after the wire frees up, never sooner
        next_free = time.perf_counter()
        try:
            while True:
                chunk = src.recv(self.CHUNK)
                if not chunk:
                    break
                now = time.perf_counter()
                next_free = max(next_free, now) + len(chunk) * 8.0 / (self.mbps * 1e6)
                _sleep_until(next_free)
                dst.sendall(chunk)
        except OSError:
            pass
        finally:
            try:
                dst.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    def stop(self):
        self._running = False
        try:
            self._listener.close()
        except OSError:
            pass
        for s in list(self._socks):
            try:
                s.close()
            except OSError:
                pass
