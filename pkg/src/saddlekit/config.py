"""Run configuration: flat key=value sections parsed with configparser."""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .kernels import RadialKernel, frac_kernel, frac_constant
from .layer1d import Nonlinearity, allen_cahn, peierls, from_odd_coefficients


class ConfigError(Exception):
    """Malformed or inconsistent run configuration; exits with usage code."""


@dataclass
class RunConfig:
    kernel_kind: str = "fractional"
    gamma: float = 0.5
    m: int = 1
    kernel_table: str = ""
    kernel_form: str = ""
    kernel_params: dict = field(default_factory=dict)
    lam: float = 1.0
    Lam: float = 1.0
    nonlinearity_name: str = "allen-cahn"
    poly_coeffs: tuple = ()
    h2d: float = 0.25
    s_max: float = 20.0
    layer_L: float = 20.0
    layer_h: float = 0.05
    radii: tuple = (5.0, 10.0, 15.0, 20.0)
    eigen_radii: tuple = (2.0, 4.0, 8.0)
    torsion_radii: tuple = (1.0, 2.0, 4.0, 8.0)
    torsion_cells: int = 400
    seed: int = 0
    threads: int = 1
    out: str = "runs/out"
    config_hash: str = ""
    source_path: str = ""

    @property
    def dim(self) -> int:
        return 2 * self.m

    def kernel(self) -> RadialKernel:
        n = self.dim
        g = self.gamma
        if self.kernel_kind == "fractional":
            return frac_kernel(n, g)
        if self.kernel_kind == "table":
            path = self.kernel_table
            if not os.path.exists(path):
                raise ConfigError(f"kernel table not found: {path}")
            data = np.loadtxt(path, delimiter=",", comments="#")
            r, k = data[:, 0], data[:, 1]
            if np.any(k <= 0):
                raise ConfigError("kernel table must be positive")
            lr, lk = np.log(r), np.log(k)

            def profile(rr, lr=lr, lk=lk):
                return np.exp(np.interp(np.log(np.asarray(rr, float)), lr, lk))

            return RadialKernel(dim=n, order=g, profile=profile,
                                lam=self.lam, Lam=self.Lam, name=f"table({path})")
        if self.kernel_kind == "expression":
            c = frac_constant(n, g)
            p = self.kernel_params
            form = self.kernel_form
            if form == "power":
                a = p.get("a", 1.0)
                prof = lambda r: a * c * np.asarray(r, float) ** (-n - 2 * g)
            elif form == "power_exp":
                a, b = p.get("a", 1.0), p.get("b", 1.0)
                prof = lambda r: a * c * np.asarray(r, float) ** (-n - 2 * g) * (
                    np.exp(-b * np.asarray(r, float)) + 1.0)
            elif form == "power_cos":
                a, b = p.get("a", 2.0), p.get("b", 1.0)
                if a <= abs(b):
                    raise ConfigError("power_cos needs a > |b| for positivity")
                prof = lambda r: c * np.asarray(r, float) ** (-n - 2 * g) * (
                    a + b * np.cos(np.asarray(r, float)))
            else:
                raise ConfigError(f"unknown expression form {form!r}")
            return RadialKernel(dim=n, order=g, profile=prof, lam=self.lam,
                                Lam=self.Lam, name=f"expr({form})")
        raise ConfigError(f"unknown kernel kind {self.kernel_kind!r}")

    def nonlinearity(self) -> Nonlinearity:
        name = self.nonlinearity_name
        if name == "allen-cahn":
            return allen_cahn()
        if name == "peierls":
            return peierls()
        if name == "odd-poly":
            if not self.poly_coeffs:
                raise ConfigError("odd-poly nonlinearity needs coeffs")
            return from_odd_coefficients(self.poly_coeffs)
        raise ConfigError(f"unknown nonlinearity {name!r}")

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as f:
            text = f.read()
        parser = configparser.ConfigParser()
        parser.optionxform = str     # lam and Lam are distinct keys
        try:
            parser.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config: {e}") from e
        cfg = cls()
        cfg.config_hash = hashlib.sha256(text.encode()).hexdigest()[:16]
        cfg.source_path = path

        def get(section, key, cast, default):
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    return cast(raw)
                except ValueError as e:
                    raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from e
            return default

        def floats(raw):
            return tuple(float(x) for x in raw.replace(",", " ").split())

        cfg.kernel_kind = get("kernel", "kind", str, cfg.kernel_kind)
        cfg.gamma = get("kernel", "gamma", float, cfg.gamma)
        if not 0.0 < cfg.gamma < 1.0:
            raise ConfigError(f"[kernel] gamma must lie in (0,1), got {cfg.gamma}")
        cfg.kernel_table = get("kernel", "path", str, "")
        cfg.kernel_form = get("kernel", "form", str, "")
        cfg.lam = get("kernel", "lam", float, cfg.lam)
        cfg.Lam = get("kernel", "Lam", float, cfg.Lam)
        if parser.has_section("kernel"):
            for key in ("a", "b"):
                if parser.has_option("kernel", key):
                    cfg.kernel_params[key] = parser.getfloat("kernel", key)
        cfg.nonlinearity_name = get("nonlinearity", "name", str, cfg.nonlinearity_name)
        if parser.has_option("nonlinearity", "coeffs"):
            cfg.poly_coeffs = floats(parser.get("nonlinearity", "coeffs"))
        cfg.m = get("geometry", "m", int, cfg.m)
        if cfg.m < 1:
            raise ConfigError("[geometry] m must be >= 1")
        cfg.h2d = get("geometry", "h2d", float, cfg.h2d)
        cfg.s_max = get("geometry", "s_max", float, cfg.s_max)
        cfg.layer_L = get("layer", "L", float, cfg.layer_L)
        cfg.layer_h = get("layer", "h", float, cfg.layer_h)
        cfg.radii = get("schedule", "radii", floats, cfg.radii)
        cfg.eigen_radii = get("schedule", "eigen_radii", floats, cfg.eigen_radii)
        cfg.torsion_radii = get("schedule", "torsion_radii", floats, cfg.torsion_radii)
        cfg.torsion_cells = get("schedule", "torsion_cells", int, cfg.torsion_cells)
        cfg.seed = get("run", "seed", int, cfg.seed)
        cfg.threads = get("run", "threads", int, cfg.threads)
        cfg.out = get("run", "out", str, cfg.out)
        if any(r > cfg.s_max + 1e-9 for r in cfg.radii):
            raise ConfigError("[schedule] radii must not exceed [geometry] s_max")
        return cfg
