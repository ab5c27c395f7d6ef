"""The family of increasing functions h applied to distances."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

KIND_CODES = {"square": 0, "cosh_pow": 1, "identity": 2, "log": 3}
TRAINABLE = ("square", "cosh_pow")


@dataclass(frozen=True)
class HFunction:
    kind: str
    power: int = 1

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown h kind {self.kind!r}")
        if self.kind == "cosh_pow" and self.power < 1:
            raise ValueError("cosh power must be a positive integer")

    @classmethod
    def parse(cls, name: str) -> "HFunction":
        """Accepts ``square``, ``x2``, ``cosh``, ``cosh2``, ``cosh^K``, ``identity``/``x`` and ``log``."""
        name = name.strip().lower()
        if name in ("square", "x2", "x^2", "sq"):
            return cls("square")
        if name in ("identity", "x", "id"):
            return cls("identity")
        if name == "log":
            return cls("log")
        m = re.fullmatch(r"cosh(?:\^?(\d+))?", name)
        if m:
            return cls("cosh_pow", int(m.group(1) or 1))
        raise ValueError(f"unknown h function {name!r}")

    @property
    def name(self) -> str:
        if self.kind != "cosh_pow":
            return self.kind
        if self.power == 1:
            return "cosh"
        if self.power == 2:
            return "cosh2"
        return f"cosh^{self.power}"

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    @classmethod
    def from_code(cls, code: int, power: int) -> "HFunction":
        for kind, c in KIND_CODES.items():
            if c == code:
                return cls(kind, power if kind == "cosh_pow" else 1)
        raise ValueError(f"unknown h code {code}")

    @property
    def domain_min(self) -> float:
        """Smallest value of h on [0, inf); inverse arguments are clamped up to it."""
        return {"square": 0.0, "cosh_pow": 1.0, "identity": 0.0, "log": -np.inf}[self.kind]

    def __call__(self, d):
        d = np.asarray(d, dtype=np.float64)
        if self.kind == "square":
            return d * d
        if self.kind == "cosh_pow":
            return np.cosh(d) ** self.power
        if self.kind == "identity":
            return d
        return np.log(d)

    def derivative(self, d):
        d = np.asarray(d, dtype=np.float64)
        if self.kind == "square":
            return 2.0 * d
        if self.kind == "cosh_pow":
            return self.power * np.cosh(d) ** (self.power - 1) * np.sinh(d)
        if self.kind == "identity":
            return np.ones_like(d)
        return 1.0 / d

    def inverse(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "square":
            return np.sqrt(x)
        if self.kind == "cosh_pow":
            return np.arccosh(x ** (1.0 / self.power))
        if self.kind == "identity":
            return x
        return np.exp(x)


def default_lr(h: HFunction) -> float:
    return 0.01 if h.kind == "cosh_pow" else 0.05
