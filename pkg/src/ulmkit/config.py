"""Plain-text key=value configuration with dotted sections.

One key per line (probe.fc=15.625e6), '#' comments, blank lines ignored. Every
known key has a typed default; serialization emits all keys sorted so a config
round-trips losslessly (floats via repr). Custom phantoms add canal.N.points /
canal.N.diameter / canal.N.speed keys.
"""

from __future__ import annotations

from dataclasses import dataclass

from ulmkit.rfsim import Canal, PhantomSpec, Probe

DEFAULTS = {
    "probe.n_elements": 128,
    "probe.pitch": 0.11e-3,
    "probe.fc": 15.625e6,
    "probe.fs": 100e6,
    "probe.c": 1540.0,
    "probe.frame_rate": 500.0,
    "pulse.n_cycles": 5,
    "phantom.preset": "demo",  # demo | twins | line | custom
    "phantom.bubbles_per_frame": 6,
    "phantom.n_frames": 240,
    "phantom.noise_db": 20.0,
    "phantom.noise_enabled": True,
    "phantom.seed": 7,
    "grid.x_min": -1.77408e-3,  # -18 wavelengths: pixel columns land on multiples of lambda
    "grid.x_max": 1.77408e-3,
    "grid.z_min": 8.67328e-3,  # 88 wavelengths
    "grid.z_max": 12.81280e-3,  # 130 wavelengths
    "grid.pitch_lambda": 1.0,
    "grid.axial_refine": 13,
    "apod.kind": "hann",
    "apod.f_number": 1.0,
    "bpf.center_frac": 2.0,  # center = center_frac * fc
    "bpf.fractional_bandwidth": 0.6,
    "bpf.n_taps": 63,
    "clutter.cut_low": 0,
    "clutter.cut_high": 0,
    "detect.max_count": 30,
    "detect.min_separation_px": 3,
    "detect.threshold_rel": 0.3,
    "localize.methods": "spinterp,gaussfit,wa,rs",
    "localize.wa_literal": False,
    "track.max_link": 0.0,  # meters; 0 = auto (2x expected per-frame displacement)
    "track.max_gap": 0,
    "track.min_length": 5,
    "map.pitch_lambda": 0.1,
    "metrics.masked": True,
    "metrics.region": "",  # "x0:x1:z0:z1" in meters; empty = preset default
    "beamformer": "both",  # das | fdmas | both
    "bmode.dynamic_range_db": 60.0,
}

_CANAL_SUFFIX_TYPES = {"points": str, "diameter": float, "speed": float}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Immutable view over a validated flat key->value map."""

    items: tuple  # sorted ((key, value), ...)

    def __getitem__(self, key: str):
        d = dict(self.items)
        if key not in d:
            raise KeyError(key)
        return d[key]

    def get(self, key: str, default=None):
        return dict(self.items).get(key, default)

    # ---- domain object builders -------------------------------------------------

    def probe(self) -> Probe:
        return Probe(
            n_elements=self["probe.n_elements"],
            pitch=self["probe.pitch"],
            fc=self["probe.fc"],
            fs=self["probe.fs"],
            c=self["probe.c"],
            frame_rate=self["probe.frame_rate"],
        )

    def canals(self) -> tuple:
        preset = self["phantom.preset"]
        if preset != "custom":
            return preset_canals(preset, self.probe())
        d = dict(self.items)
        indices = sorted({int(k.split(".")[1]) for k in d if k.startswith("canal.")})
        if not indices:
            raise ConfigError("custom phantom requires canal.N.* keys")
        out = []
        for i in indices:
            try:
                pts = _parse_points(d[f"canal.{i}.points"])
                out.append(Canal(points=pts, diameter=d[f"canal.{i}.diameter"], speed=d[f"canal.{i}.speed"]))
            except KeyError as exc:
                raise ConfigError(f"canal.{i} is missing {exc.args[0]}") from exc
        return tuple(out)

    def phantom(self) -> PhantomSpec:
        return PhantomSpec(
            canals=self.canals(),
            bubbles_per_frame=self["phantom.bubbles_per_frame"],
            n_frames=self["phantom.n_frames"],
            noise_db=self["phantom.noise_db"] if self["phantom.noise_enabled"] else None,
            rng_seed=self["phantom.seed"],
        )

    def methods(self) -> tuple:
        raw = [m.strip() for m in self["localize.methods"].split(",") if m.strip()]
        from ulmkit.localize import METHODS

        for m in raw:
            if m not in METHODS:
                raise ConfigError(f"unknown localizer {m!r}")
        if not raw:
            raise ConfigError("localize.methods is empty")
        return tuple(raw)

    def beamformers(self) -> tuple:
        sel = self["beamformer"]
        if sel == "both":
            return ("DAS", "FDMAS")
        if sel == "das":
            return ("DAS",)
        if sel == "fdmas":
            return ("FDMAS",)
        raise ConfigError(f"unknown beamformer selection {sel!r}")

    def max_link(self) -> float:
        configured = self["track.max_link"]
        if configured > 0:
            return configured
        speeds = [c.speed for c in self.canals()]
        return 2.0 * max(speeds) / self["probe.frame_rate"]

    def metrics_region(self) -> tuple | None:
        """Region (x0, x1, z0, z1) in meters, from config or the preset default."""
        raw = self["metrics.region"]
        if raw:
            parts = [float(p) for p in raw.split(":")]
            if len(parts) != 4:
                raise ConfigError("metrics.region must be x0:x1:z0:z1")
            return tuple(parts)
        return preset_region(self["phantom.preset"], self.probe())


def _type_of(key: str):
    if key in DEFAULTS:
        return type(DEFAULTS[key])
    parts = key.split(".")
    if len(parts) == 3 and parts[0] == "canal" and parts[1].isdigit() and parts[2] in _CANAL_SUFFIX_TYPES:
        return _CANAL_SUFFIX_TYPES[parts[2]]
    raise ConfigError(f"unknown config key {key!r}")


def _parse_value(key: str, raw: str):
    t = _type_of(key)
    raw = raw.strip()
    try:
        if t is bool:
            if raw not in ("true", "false"):
                raise ValueError("expected true or false")
            return raw == "true"
        if t is int:
            return int(raw)
        if t is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_points(raw: str) -> tuple:
    pts = []
    for token in raw.replace(",", " ").split():
        xz = token.split(":")
        if len(xz) != 2:
            raise ConfigError(f"bad canal point {token!r}; expected x:z")
        pts.append((float(xz[0]), float(xz[1])))
    if len(pts) < 2:
        raise ConfigError("canal needs at least 2 points")
    return tuple(pts)


def parse_config(text: str) -> PipelineConfig:
    """Parse key=value text over the defaults; unknown keys are errors."""
    values = dict(DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        values[key] = _parse_value(key, raw)
    cfg = PipelineConfig(items=tuple(sorted(values.items())))
    validate(cfg)
    return cfg


def serialize_config(cfg: PipelineConfig) -> str:
    return "\n".join(f"{k}={_format_value(v)}" for k, v in cfg.items) + "\n"


def load_config(path: str) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def default_config() -> PipelineConfig:
    cfg = PipelineConfig(items=tuple(sorted(DEFAULTS.items())))
    validate(cfg)
    return cfg


def validate(cfg: PipelineConfig) -> None:
    if cfg["phantom.n_frames"] < 1:
        raise ConfigError("phantom.n_frames must be >= 1")
    if cfg["phantom.preset"] not in ("demo", "twins", "line", "custom"):
        raise ConfigError(f"unknown phantom preset {cfg['phantom.preset']!r}")
    if cfg["grid.x_min"] >= cfg["grid.x_max"] or cfg["grid.z_min"] >= cfg["grid.z_max"]:
        raise ConfigError("grid extent is empty")
    if cfg["grid.z_min"] <= 0:
        raise ConfigError("grid.z_min must be > 0")
    if cfg["grid.pitch_lambda"] <= 0 or cfg["map.pitch_lambda"] <= 0:
        raise ConfigError("grid pitches must be > 0")
    if cfg["grid.axial_refine"] < 1:
        raise ConfigError("grid.axial_refine must be >= 1")
    if not 0 < cfg["detect.threshold_rel"] < 1:
        raise ConfigError("detect.threshold_rel must be in (0, 1)")
    cfg.probe()
    cfg.methods()
    cfg.beamformers()
    if cfg["phantom.preset"] == "custom":
        cfg.canals()


# ---- phantom presets -------------------------------------------------------------


def preset_canals(name: str, probe: Probe) -> tuple:
    """Bundled parametric phantoms, all inside the default imaging field."""
    lam = probe.wavelength
    if name == "twins":
        # 0.4-wavelength separation, symmetric about the x = 0 pixel column
        return (
            Canal(points=((-0.2 * lam, 9.8e-3), (-0.2 * lam, 12.2e-3)), diameter=10e-6, speed=12e-3),
            Canal(points=((+0.2 * lam, 9.8e-3), (+0.2 * lam, 12.2e-3)), diameter=10e-6, speed=12e-3),
        )
    if name == "line":
        return (Canal(points=((0.0, 9.5e-3), (0.0, 12.0e-3)), diameter=20e-6, speed=25e-3),)
    if name == "demo":
        twins = preset_canals("twins", probe)
        horizontal = Canal(points=((-1.5e-3, 9.2e-3), (1.5e-3, 9.2e-3)), diameter=40e-6, speed=25e-3)
        s_curve = Canal(
            points=(
                (-1.45e-3, 9.6e-3),
                (-1.05e-3, 10.2e-3),
                (-1.35e-3, 10.9e-3),
                (-0.95e-3, 11.6e-3),
                (-1.25e-3, 12.3e-3),
            ),
            diameter=30e-6,
            speed=15e-3,
        )
        return twins + (horizontal, s_curve)
    raise ConfigError(f"no canal preset named {name!r}")


def preset_region(name: str, probe: Probe) -> tuple | None:
    """Vertical-canal scoring region (x0, x1, z0, z1) for the bundled phantoms."""
    lam = probe.wavelength
    if name in ("demo", "twins"):
        return (-5.0 * lam, 5.0 * lam, 10.0e-3, 12.0e-3)
    if name == "line":
        return (-5.0 * lam, 5.0 * lam, 9.8e-3, 11.8e-3)
    return None
