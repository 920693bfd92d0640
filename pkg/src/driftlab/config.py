"""Run configuration: flat key-value sections, lossless file round-trip."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .dirichlet import BuildConfig, OperatorSpec, random_coupling
from .errors import InvalidArgument
from .geometry import model_profile
from .spectrum import sphere_spectrum, torus_spectrum


@dataclass
class RunConfig:
    """Everything a run needs; defaults reproduce the standard setup
    (n = 3 paraboloid over the doubled round 2-sphere)."""

    # [profile]
    n: int = 3
    scale: float = 2.0
    r_cone: float = 0.5
    r_asym: float = 2.0
    mu: float = 0.5
    # [spectrum]
    spectrum_kind: str = "sphere"
    spectrum_count: int = 4
    torus_lengths: str = ""
    # [operator]
    mode_cut: int = 16
    coupling_support_lo: float = 4.0
    coupling_support_hi: float = 8.0
    coupling_amplitude: float = 0.3
    coupling_seed: int = 5
    # [grids]
    radial_pts_per_decade: int = 64
    dirichlet_pts_per_octave: int = 32
    battery_pts_per_octave: int = 16
    # [ladders]
    battery_i_lo: int = 4
    battery_i_hi: int = 10
    build_i_start: int = 9
    build_i_out: int = 15
    rho_far: float = 1024.0
    # [tolerances]
    growth_tol: float = 5e-3
    gram_tol: float = 0.01
    liouville_slack: float = 0.05
    construction_tol: float = 1e-5
    # [run]
    seed: int = 11
    workers: int = 1
    strict: bool = False
    out_dir: str = "runs"

    _SECTIONS = {
        "profile": ("n", "scale", "r_cone", "r_asym", "mu"),
        "spectrum": ("spectrum_kind", "spectrum_count", "torus_lengths"),
        "operator": ("mode_cut", "coupling_support_lo", "coupling_support_hi",
                     "coupling_amplitude", "coupling_seed"),
        "grids": ("radial_pts_per_decade", "dirichlet_pts_per_octave",
                  "battery_pts_per_octave"),
        "ladders": ("battery_i_lo", "battery_i_hi", "build_i_start",
                    "build_i_out", "rho_far"),
        "tolerances": ("growth_tol", "gram_tol", "liouville_slack",
                       "construction_tol"),
        "run": ("seed", "workers", "strict", "out_dir"),
    }

    def __post_init__(self):
        for name in ("growth_tol", "gram_tol", "liouville_slack",
                     "construction_tol"):
            if getattr(self, name) <= 0:
                raise InvalidArgument(f"tolerance {name} must be positive")

    # -- file round-trip --------------------------------------------------------

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        by_name = {f.name: f for f in fields(self)}
        for section, keys in self._SECTIONS.items():
            cp[section] = {}
            for key in keys:
                value = getattr(self, key)
                cp[section][key] = repr(value) if isinstance(value, float) else str(value)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise InvalidArgument(f"malformed config: {exc}") from exc
        kwargs = {}
        by_name = {f.name: f for f in fields(cls)}
        for section, keys in cls._SECTIONS.items():
            if not cp.has_section(section):
                continue
            for key in keys:
                if not cp.has_option(section, key):
                    continue
                raw = cp.get(section, key)
                ftype = by_name[key].type
                try:
                    if ftype in ("int", int):
                        kwargs[key] = int(raw)
                    elif ftype in ("float", float):
                        kwargs[key] = float(raw)
                    elif ftype in ("bool", bool):
                        kwargs[key] = raw.strip().lower() in ("1", "true", "yes")
                    else:
                        kwargs[key] = raw
                except ValueError as exc:
                    raise InvalidArgument(
                        f"config key [{section}] {key}={raw!r}: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    # -- object builders ----------------------------------------------------------

    def profile(self):
        return model_profile(self.n, self.scale, self.r_cone, self.r_asym,
                             mu=self.mu)

    def spectrum(self):
        if self.spectrum_kind == "sphere":
            return sphere_spectrum(self.n - 1, self.scale, self.spectrum_count)
        if self.spectrum_kind == "torus":
            lengths = [float(x) for x in self.torus_lengths.split(",") if x]
            return torus_spectrum(lengths, self.spectrum_count)
        raise InvalidArgument(f"unknown spectrum kind {self.spectrum_kind!r}")

    def operator(self, coupled: bool = False, levels=None) -> OperatorSpec:
        spec = self.spectrum()
        prof = self.profile()
        cut = min(self.mode_cut, spec.n_modes)
        couplings = ()
        if coupled:
            couplings = (random_coupling(
                spec, cut,
                (self.coupling_support_lo, self.coupling_support_hi),
                self.coupling_amplitude, self.coupling_seed, levels=levels),)
        return OperatorSpec(profile=prof, spectrum=spec, mode_cut=cut,
                            couplings=couplings)

    def build_config(self) -> BuildConfig:
        return BuildConfig(i_start=self.build_i_start, i_out=self.build_i_out,
                           tol=self.construction_tol,
                           pts_per_octave=self.dirichlet_pts_per_octave,
                           seed=self.seed, rho_far=self.rho_far)
