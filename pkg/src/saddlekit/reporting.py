"""Plain-text run reports: every claim names its tolerance and outcome."""

from __future__ import annotations

import os
from dataclasses import dataclass, field


@dataclass
class Report:
    title: str
    config_hash: str = ""
    seed: int = 0
    version: str = ""
    lines: list = field(default_factory=list)
    failures: int = 0

    def __post_init__(self):
        if not self.version:
            from . import __version__
            self.version = __version__

    def info(self, text: str):
        self.lines.append(("INFO", text))

    def check(self, name: str, passed: bool, detail: str = "", tolerance: str = ""):
        status = "PASS" if passed else "FAIL"
        if not passed:
            self.failures += 1
        tol = f" [tol {tolerance}]" if tolerance else ""
        self.lines.append((status, f"{name}: {detail}{tol}"))
        return passed

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def render(self) -> str:
        head = [f"# {self.title}",
                f"# version={self.version} config={self.config_hash} seed={self.seed}"]
        body = [f"{tag:5s} {text}" for tag, text in self.lines]
        tail = [f"# {'all checks passed' if self.passed else f'{self.failures} check(s) failed'}"]
        return "\n".join(head + body + tail) + "\n"

    def write(self, path: str):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            f.write(self.render())
