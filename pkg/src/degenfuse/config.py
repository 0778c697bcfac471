"""INI-style configuration files for the pipeline and the scene generator.

Both use ``[group]`` sections of ``key = value`` lines. Unknown sections or
keys are rejected and every value is validated on load.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import re

from .degeneracy import DegeneracyParams
from .odometry import IcpParams, SourceParams
from .radar import RansacParams
from .removal import RemovalParams, UncertaintyModel
from .selection import SelectParams
from .synth import (ActorConfig, Box, SceneConfig, SceneConfigError, SensorConfig,
                    SmokeInterval, TrajectorySpec, WorldConfig)


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text, n=None):
    vals = tuple(float(v) for v in text.split(",") if v.strip())
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} comma-separated numbers")
    return vals


def _points2(text):
    """``x,y; x,y; ...`` -> tuple of (x, y)."""
    return tuple(_floats(p, 2) for p in text.split(";") if p.strip())


def _boxes(text):
    return tuple(Box(*_floats(p, 5)) for p in text.split(";") if p.strip())


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# (section, key) -> (parser, default). Defaults are the single source of truth.
PIPELINE_SCHEMA = {
    "radar_preprocess": {
        "max_iterations": (int, 200),
        "inlier_threshold": (float, 0.25),
        "min_inlier_ratio": (float, 0.3),
        "rng_seed": (int, 0),
        "split_threshold": (float, 0.25),
    },
    "degeneracy": {
        "match_distance": (float, 0.5),
        "ratio_threshold": (float, 0.5),
    },
    "dynamic_removal": {
        "pair_radius": (float, 1.0),
        "mahalanobis_gate": (float, 3.0),
        "sigma_r_coeff": (float, 0.00215),
        "sigma_azimuth_deg": (float, 0.5),
        "sigma_elevation_deg": (float, 1.0),
        "dump_removed": (_bool, False),
    },
    "odometry": {
        "max_iterations": (int, 30),
        "convergence_translation": (float, 1e-4),
        "convergence_rotation": (float, 1e-4),
        "map_voxel_size": (float, 0.4),
        "window_frames": (int, 20),
        "lidar_correspondence_distance": (float, 1.0),
        "lidar_voxel_size": (float, 0.4),
        "radar_correspondence_distance": (float, 2.5),
        "radar_voxel_size": (float, 0.0),
    },
    "pipeline": {
        "sync_tolerance_s": (float, 0.05),
        "sensor_select": (_bool, True),
        "eval_max_dt": (float, 0.01),
        "rpe_delta": (int, 1),
    },
}


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    values: dict  # {section: {key: typed value}}

    def __getitem__(self, section):
        return self.values[section]

    @property
    def select_params(self) -> SelectParams:
        rp, dg, dr, pl = (self.values[k] for k in
                          ("radar_preprocess", "degeneracy", "dynamic_removal", "pipeline"))
        return SelectParams(
            ransac=RansacParams(rp["max_iterations"], rp["inlier_threshold"],
                                rp["min_inlier_ratio"], rp["rng_seed"]),
            split_threshold=rp["split_threshold"],
            degeneracy=DegeneracyParams(dg["match_distance"], dg["ratio_threshold"]),
            removal=RemovalParams(dr["pair_radius"], dr["mahalanobis_gate"],
                                  UncertaintyModel(dr["sigma_r_coeff"], dr["sigma_azimuth_deg"],
                                                   dr["sigma_elevation_deg"])),
            sync_tolerance_s=pl["sync_tolerance_s"],
            sensor_select=pl["sensor_select"],
        )

    @property
    def icp_params(self) -> IcpParams:
        o = self.values["odometry"]
        return IcpParams(
            max_iterations=o["max_iterations"],
            convergence_translation=o["convergence_translation"],
            convergence_rotation=o["convergence_rotation"],
            map_voxel_size=o["map_voxel_size"],
            window_frames=o["window_frames"],
            lidar=SourceParams(o["lidar_correspondence_distance"], o["lidar_voxel_size"]),
            radar=SourceParams(o["radar_correspondence_distance"], o["radar_voxel_size"]),
        )

    def dumps(self) -> str:
        out = []
        for section, keys in self.values.items():
            out.append(f"[{section}]")
            out += [f"{k} = {_fmt(v)}" for k, v in keys.items()]
            out.append("")
        return "\n".join(out)

    def with_overrides(self, **sections) -> "PipelineConfig":
        vals = {s: dict(k) for s, k in self.values.items()}
        for section, keys in sections.items():
            for key, v in keys.items():
                if key not in vals.get(section, {}):
                    raise ConfigError(f"{section}.{key}", "unknown key")
                vals[section][key] = v
        cfg = PipelineConfig(vals)
        cfg._validate()
        return cfg

    def _validate(self):
        rp, dg, dr = (self.values[k] for k in ("radar_preprocess", "degeneracy", "dynamic_removal"))
        checks = [
            ("radar_preprocess", lambda: RansacParams(rp["max_iterations"], rp["inlier_threshold"],
                                                      rp["min_inlier_ratio"], rp["rng_seed"])),
            ("degeneracy", lambda: DegeneracyParams(dg["match_distance"], dg["ratio_threshold"])),
            ("dynamic_removal", lambda: UncertaintyModel(dr["sigma_r_coeff"], dr["sigma_azimuth_deg"],
                                                         dr["sigma_elevation_deg"])),
            ("dynamic_removal", lambda: RemovalParams(dr["pair_radius"], dr["mahalanobis_gate"])),
            ("odometry", lambda: self.icp_params),
        ]
        for section, build in checks:
            try:
                build()
            except ValueError as exc:
                raise ConfigError(section, str(exc)) from None
        pl = self.values["pipeline"]
        if not rp["split_threshold"] > 0:
            raise ConfigError("radar_preprocess.split_threshold", "must be > 0")
        if not pl["sync_tolerance_s"] >= 0:
            raise ConfigError("pipeline.sync_tolerance_s", "must be >= 0")
        if not pl["eval_max_dt"] > 0:
            raise ConfigError("pipeline.eval_max_dt", "must be > 0")
        if pl["rpe_delta"] < 1:
            raise ConfigError("pipeline.rpe_delta", "must be >= 1")


def _parser():
    p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
    p.optionxform = str
    return p


def default_pipeline_config() -> PipelineConfig:
    return PipelineConfig({s: {k: d for k, (_, d) in keys.items()}
                           for s, keys in PIPELINE_SCHEMA.items()})


def loads_pipeline_config(text: str) -> PipelineConfig:
    p = _parser()
    try:
        p.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    values = default_pipeline_config().values
    for section in p.sections():
        if section not in PIPELINE_SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in p[section].items():
            if key not in PIPELINE_SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            parse = PIPELINE_SCHEMA[section][key][0]
            try:
                values[section][key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}", str(exc)) from None
    cfg = PipelineConfig(values)
    cfg._validate()
    return cfg


def load_pipeline_config(path) -> PipelineConfig:
    with open(path) as fh:
        return loads_pipeline_config(fh.read())


# ------------------------------------------------------------- scene files

_SCENE_SCHEMA = {
    "scene": {"frames": int, "seed": int},
    "sensor": {f.name: f.type for f in dataclasses.fields(SensorConfig)},
    "world": {"size_x": float, "size_y": float, "wall_height": float, "ground": _bool,
              "walls": _bool, "boxes": _boxes},
    "trajectory": {"shape": str, "center": lambda t: _floats(t, 2), "radius": float,
                   "waypoints": _points2, "loop": _bool, "speed": float},
    "actor": {"waypoints": _points2, "speed": float, "radius": float, "height": float,
              "lidar_points": int, "radar_points": int},
    "smoke": {"start_frame": int, "end_frame": int, "mode": str, "clutter_fraction": float,
              "radius": float},
}
_TYPE_NAMES = {"float": float, "int": int, "bool": _bool, "str": str}


def _section_values(p, section, schema_key):
    schema = _SCENE_SCHEMA[schema_key]
    out = {}
    for key, raw in p[section].items():
        if key not in schema:
            raise SceneConfigError(f"{section}.{key}", "unknown key")
        parse = schema[key]
        if isinstance(parse, str):
            parse = _TYPE_NAMES[parse]
        try:
            out[key] = parse(raw.strip())
        except (ValueError, TypeError) as exc:
            raise SceneConfigError(f"{section}.{key}", str(exc)) from None
    return out


def loads_scene_config(text: str) -> SceneConfig:
    p = _parser()
    try:
        p.read_string(text)
    except configparser.Error as exc:
        raise SceneConfigError("file", str(exc).splitlines()[0]) from None
    kwargs, actors, smoke = {}, [], []
    for section in p.sections():
        m = re.fullmatch(r"(actor|smoke)\.(\d+)", section)
        if m:
            vals = _section_values(p, section, m.group(1))
            try:
                if m.group(1) == "actor":
                    actors.append((int(m.group(2)), ActorConfig(**vals)))
                else:
                    smoke.append((int(m.group(2)), SmokeInterval(**vals)))
            except TypeError as exc:
                raise SceneConfigError(section, str(exc)) from None
        elif section in ("sensor", "world", "trajectory", "scene"):
            kwargs[section] = _section_values(p, section, section)
        else:
            raise SceneConfigError(section, "unknown section")
    scene = kwargs.get("scene", {})
    config = SceneConfig(
        frames=scene.get("frames", SceneConfig.frames),
        seed=scene.get("seed", SceneConfig.seed),
        world=WorldConfig(**kwargs.get("world", {})),
        trajectory=TrajectorySpec(**kwargs.get("trajectory", {})),
        sensor=SensorConfig(**kwargs.get("sensor", {})),
        actors=tuple(a for _, a in sorted(actors, key=lambda x: x[0])),
        smoke=tuple(s for _, s in sorted(smoke, key=lambda x: x[0])),
    )
    config.validate()
    return config


def load_scene_config(path) -> SceneConfig:
    with open(path) as fh:
        return loads_scene_config(fh.read())


def dumps_scene_config(config: SceneConfig) -> str:
    def pts(v):
        return "; ".join(",".join(_fmt(float(c)) for c in p) for p in v)

    buf = io.StringIO()
    buf.write(f"[scene]\nframes = {config.frames}\nseed = {config.seed}\n\n[sensor]\n")
    for f in dataclasses.fields(SensorConfig):
        buf.write(f"{f.name} = {_fmt(getattr(config.sensor, f.name))}\n")
    w = config.world
    buf.write(f"\n[world]\nsize_x = {_fmt(w.size_x)}\nsize_y = {_fmt(w.size_y)}\n"
              f"wall_height = {_fmt(w.wall_height)}\nground = {_fmt(w.ground)}\n"
              f"walls = {_fmt(w.walls)}\n")
    if w.boxes:
        buf.write("boxes = " + "; ".join(",".join(_fmt(float(v)) for v in dataclasses.astuple(b))
                                         for b in w.boxes) + "\n")
    t = config.trajectory
    buf.write(f"\n[trajectory]\nshape = {t.shape}\ncenter = {pts([t.center])}\n"
              f"radius = {_fmt(t.radius)}\nloop = {_fmt(t.loop)}\nspeed = {_fmt(t.speed)}\n")
    if t.waypoints:
        buf.write(f"waypoints = {pts(t.waypoints)}\n")
    for i, a in enumerate(config.actors):
        buf.write(f"\n[actor.{i}]\nwaypoints = {pts(a.waypoints)}\n")
        for name in ("speed", "radius", "height", "lidar_points", "radar_points"):
            buf.write(f"{name} = {_fmt(getattr(a, name))}\n")
    for i, s in enumerate(config.smoke):
        buf.write(f"\n[smoke.{i}]\n")
        for f in dataclasses.fields(SmokeInterval):
            buf.write(f"{f.name} = {_fmt(getattr(s, f.name))}\n")
    return buf.getvalue()
