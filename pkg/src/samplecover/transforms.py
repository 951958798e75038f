"""Transformation sets and finite orbit approximations.

Every kind is described by a list of *parameters*, one per orbit member,
with the identity always first.  Random kinds draw each parameter from its
own generator keyed by ``(seed, point_index, draw_index, stream)`` so an
orbit does not depend on which other points are processed, or in what order,
and growing ``sample_budget`` only appends members.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .data import DataPoint, load_orbit_manifest

KINDS = (
    "identity",
    "flip-horizontal",
    "rotate",
    "crop",
    "cutout",
    "color-jitter",
    "precomputed-orbit",
    "product",
)
SAMPLED_KINDS = ("crop", "cutout", "color-jitter")

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "identity": {},
    "flip-horizontal": {},
    "rotate": {"degrees": (-30.0, 30.0), "step": 1.0},
    "crop": {"padding": 4, "size": None},
    "cutout": {"value": 0.5, "scale": 0.05, "ratio": 1.0},
    "color-jitter": {"brightness": (0.75, 1.25), "contrast": (0.75, 1.25),
                     "saturation": (0.75, 1.25)},
    "precomputed-orbit": {"manifest": None, "dtype": "u8"},
    "product": {},
}
DEFAULT_BUDGET = 50
DEFAULT_PRODUCT_BUDGET = 1000
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)

# stream tags keep the random draws of different kinds/factors apart
_KIND_TAG = {k: i for i, k in enumerate(KINDS)}


@dataclass(frozen=True, eq=False)
class TransformSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    sample_budget: int = DEFAULT_BUDGET
    factors: tuple["TransformSpec", ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}; expected one of {KINDS}")
        merged = dict(DEFAULT_PARAMS[self.kind])
        unknown = set(self.params) - set(merged) - {"orbits", "tag"}
        if unknown:
            raise ValueError(f"{self.kind}: unknown parameters {sorted(unknown)}")
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "factors", tuple(self.factors))
        if int(self.sample_budget) != self.sample_budget or self.sample_budget < 1:
            raise ValueError(f"sample_budget must be a positive integer, got {self.sample_budget!r}")
        for key in ("degrees", "brightness", "contrast", "saturation"):
            if key in merged:
                lo, hi = merged[key]
                if not lo <= hi:
                    raise ValueError(f"{self.kind}: empty range {key}={merged[key]}")
        if self.kind == "rotate" and merged["step"] <= 0:
            raise ValueError("rotate step must be positive")
        if self.kind == "product":
            if len(self.factors) < 2:
                raise ValueError("a product needs at least two factors")
            for pos, f in enumerate(self.factors):
                if f.kind == "precomputed-orbit" and pos != 0:
                    raise ValueError("a precomputed orbit can only be the first factor of a product")
        elif self.factors:
            raise ValueError(f"{self.kind} does not take factors")

    def __eq__(self, other):
        if not isinstance(other, TransformSpec):
            return NotImplemented
        return spec_to_dict(self) == spec_to_dict(other)

    @property
    def tag(self) -> str:
        if "tag" in self.params:
            return str(self.params["tag"])
        if self.kind == "product":
            return "+".join(f.tag for f in self.factors)
        return _PRESET_NAMES.get(self.kind, self.kind)


@dataclass(frozen=True)
class Orbit:
    """Finite orbit ``G(x)``: ``members`` is ``(K, H, W, C)``, member 0 is ``x``."""

    members: np.ndarray
    source_index: int

    def __len__(self) -> int:
        return self.members.shape[0]


# ---------------------------------------------------------------------------
# image operations (all on float32 (H, W, C) arrays)

def hflip(image: np.ndarray) -> np.ndarray:
    return image[:, ::-1, :]


@lru_cache(maxsize=512)
def _rotation_taps(h: int, w: int, degrees: float):
    theta = math.radians(degrees)
    c, s = math.cos(theta), math.sin(theta)
    ci, cj = (h - 1) / 2.0, (w - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    x, y = jj - cj, ci - ii
    # inverse map: sample the source at the output point rotated by -theta
    xs = c * x + s * y
    ys = -s * x + c * y
    si, sj = ci - ys, cj + xs
    i0, j0 = np.floor(si), np.floor(sj)
    fi, fj = si - i0, sj - j0
    i0, j0 = i0.astype(np.int64), j0.astype(np.int64)
    taps = []
    for di, wi in ((0, 1 - fi), (1, fi)):
        for dj, wj in ((0, 1 - fj), (1, fj)):
            # index 0 / h+1 of the zero-padded image is the out-of-frame fill
            pi = np.clip(i0 + di, -1, h) + 1
            pj = np.clip(j0 + dj, -1, w) + 1
            taps.append((pi, pj, (wi * wj).astype(np.float32)[..., None]))
    return taps


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate counter-clockwise about the centre; bilinear, zero outside."""
    if degrees == 0:
        return image
    h, w, _ = image.shape
    padded = np.pad(image, ((1, 1), (1, 1), (0, 0)))
    out = np.zeros_like(image)
    for pi, pj, wt in _rotation_taps(h, w, float(degrees)):
        out += wt * padded[pi, pj]
    return out


def pad_crop(image: np.ndarray, padding: int, top: int, left: int,
             size: tuple[int, int] | None = None) -> np.ndarray:
    h, w = size if size is not None else image.shape[:2]
    padded = np.pad(image, ((padding, padding), (padding, padding), (0, 0)), mode="edge")
    return padded[top:top + h, left:left + w]


def cutout_box(shape, scale: float, ratio: float) -> tuple[int, int]:
    h, w = shape[:2]
    area = scale * h * w
    bh = int(math.floor(math.sqrt(area * ratio)))
    bw = int(math.floor(math.sqrt(area / ratio)))
    return min(max(bh, 1), h), min(max(bw, 1), w)


def cutout(image: np.ndarray, top: int, left: int, box: tuple[int, int], value: float) -> np.ndarray:
    out = image.copy()
    out[top:top + box[0], left:left + box[1]] = value
    return out


def luminance(image: np.ndarray) -> np.ndarray:
    if image.shape[2] == 3:
        return image @ LUMA
    return image.mean(axis=2)


def color_jitter(image: np.ndarray, brightness: float, contrast: float,
                 saturation: float) -> np.ndarray:
    out = np.clip(image * np.float32(brightness), 0, 1)
    mean = np.float32(luminance(out).mean())
    out = np.clip(mean + np.float32(contrast) * (out - mean), 0, 1)
    gray = luminance(out)[..., None]
    out = np.clip(gray + np.float32(saturation) * (out - gray), 0, 1)
    return out.astype(np.float32)


# ---------------------------------------------------------------------------
# parameter lists

def _draw_rng(seed: int, point_index: int, draw: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, point_index, draw, stream])


def rotation_angles(spec: TransformSpec) -> np.ndarray:
    lo, hi = spec.params["degrees"]
    step = float(spec.params["step"])
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    angles = lo + step * np.arange(count)
    angles = np.where(np.abs(angles) < 1e-9, 0.0, angles)
    if not np.any(angles == 0):
        angles = np.concatenate([[0.0], angles])
    return angles


def _shape_hw(shape) -> tuple[int, int]:
    return int(shape[0]), int(shape[1])


def _parameters(spec: TransformSpec, shape, seed: int, point_index: int, stream: int) -> list:
    kind, p = spec.kind, spec.params
    if kind == "identity":
        return [None]
    if kind == "flip-horizontal":
        return [False, True]
    if kind == "rotate":
        return [float(a) for a in rotation_angles(spec)]
    if kind == "precomputed-orbit":
        stored = _precomputed_members(spec, point_index, shape)
        return [-1] + list(range(stored.shape[0]))
    if kind == "product":
        return _product_parameters(spec, shape, seed, point_index, stream)

    h, w = _shape_hw(shape)
    tag = stream * len(KINDS) + _KIND_TAG[kind]
    draws = []
    for k in range(spec.sample_budget):
        rng = _draw_rng(seed, point_index, k, tag)
        if kind == "crop":
            pad = int(p["padding"])
            oh, ow = p["size"] if p["size"] is not None else (h, w)
            draws.append((int(rng.integers(0, h + 2 * pad - oh + 1)),
                          int(rng.integers(0, w + 2 * pad - ow + 1))))
        elif kind == "cutout":
            bh, bw = cutout_box(shape, p["scale"], p["ratio"])
            draws.append((int(rng.integers(0, h - bh + 1)), int(rng.integers(0, w - bw + 1))))
        else:
            draws.append(tuple(float(rng.uniform(*p[key]))
                               for key in ("brightness", "contrast", "saturation")))
    return [None] + draws


def _product_parameters(spec, shape, seed, point_index, stream):
    lists, cur = [], tuple(shape)
    for pos, f in enumerate(spec.factors):
        lists.append(_parameters(f, cur, seed, point_index, stream * 8 + pos + 1))
        cur = output_shape(f, cur)
    sizes = [len(l) for l in lists]
    total = math.prod(sizes)
    if total <= spec.sample_budget:
        picks = range(total)
    else:
        rng = _draw_rng(seed, point_index, 0, 10_000 + stream)
        rest = rng.choice(np.arange(1, total), size=spec.sample_budget - 1, replace=False)
        picks = [0] + sorted(int(r) for r in rest)
    out = []
    for flat in picks:
        combo = []
        for size, lst in zip(reversed(sizes), reversed(lists)):
            flat, r = divmod(flat, size)
            combo.append(lst[r])
        out.append(tuple(reversed(combo)))
    return out


def output_shape(spec: TransformSpec, shape) -> tuple:
    shape = tuple(shape)
    if spec.kind == "crop" and spec.params["size"] is not None:
        return tuple(spec.params["size"]) + shape[2:]
    if spec.kind == "product":
        for f in spec.factors:
            shape = output_shape(f, shape)
    return shape


def _apply(spec: TransformSpec, image: np.ndarray, param, point_index: int, shape) -> np.ndarray:
    kind, p = spec.kind, spec.params
    if kind == "product":
        for f, fp in zip(spec.factors, param):
            image = _apply(f, image, fp, point_index, image.shape)
        return image
    if kind == "identity" or param is None:
        return image
    if kind == "flip-horizontal":
        return hflip(image) if param else image
    if kind == "rotate":
        return rotate(image, param)
    if kind == "crop":
        return pad_crop(image, int(p["padding"]), param[0], param[1], p["size"])
    if kind == "cutout":
        return cutout(image, param[0], param[1], cutout_box(image.shape, p["scale"], p["ratio"]),
                      p["value"])
    if kind == "color-jitter":
        return color_jitter(image, *param)
    if kind == "precomputed-orbit":
        return image if param == -1 else _precomputed_members(spec, point_index, shape)[param]
    raise AssertionError(kind)


_ORBIT_CACHE: dict = {}


def _precomputed_members(spec: TransformSpec, point_index: int, shape) -> np.ndarray:
    table = spec.params.get("orbits")
    if table is None:
        manifest = spec.params["manifest"]
        if manifest is None:
            raise ValueError("precomputed-orbit needs either 'orbits' or 'manifest'")
        key = (str(Path(manifest).resolve()), tuple(shape), spec.params["dtype"])
        if key not in _ORBIT_CACHE:
            _ORBIT_CACHE[key] = load_orbit_manifest(manifest, tuple(shape), spec.params["dtype"])
        table = _ORBIT_CACHE[key]
    members = table.get(point_index, table.get(str(point_index)))
    if members is None:
        raise KeyError(f"no precomputed orbit for sample index {point_index}")
    members = np.asarray(members, dtype=np.float32)
    if members.ndim == 3 and len(shape) == 3 and shape[2] == 1:
        members = members[..., None]
    if members.shape[1:] != tuple(shape):
        raise ValueError(
            f"precomputed orbit of sample {point_index} has member shape {members.shape[1:]}, "
            f"expected {tuple(shape)}")
    return members


# ---------------------------------------------------------------------------
# public API

def _check_shape(spec: TransformSpec, shape) -> None:
    h, w = _shape_hw(shape)
    if spec.kind == "crop":
        pad = int(spec.params["padding"])
        if pad < 0:
            raise ValueError("crop padding must be nonnegative")
        if spec.params["size"] is not None:
            oh, ow = spec.params["size"]
            if oh > h + 2 * pad or ow > w + 2 * pad:
                raise ValueError(f"crop size {(oh, ow)} exceeds padded input {(h + 2 * pad, w + 2 * pad)}")
    elif spec.kind == "product":
        cur = tuple(shape)
        for f in spec.factors:
            _check_shape(f, cur)
            cur = output_shape(f, cur)


def materialize_orbit(x, spec: TransformSpec, seed: int, point_index: int) -> Orbit:
    """Finite approximation of the orbit of ``x`` (identity member first).

    ``x`` is a :class:`DataPoint` or an ``(H, W, C)`` array.  The result is
    a pure function of ``(x, spec, seed, point_index)``.
    """
    image = x.image if isinstance(x, DataPoint) else np.asarray(x, dtype=np.float32)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3:
        raise ValueError(f"expected an (H, W, C) image, got shape {image.shape}")
    if seed < 0 or point_index < 0:
        raise ValueError("seed and point_index must be nonnegative")
    _check_shape(spec, image.shape)
    out_shape = output_shape(spec, image.shape)
    if out_shape != image.shape:
        raise ValueError(
            f"orbit members of shape {out_shape} cannot be compared with the point shape {image.shape}")
    params = _parameters(spec, image.shape, seed, point_index, 0)
    members = np.empty((len(params),) + image.shape, dtype=np.float32)
    for k, prm in enumerate(params):
        members[k] = _apply(spec, image, prm, point_index, image.shape)
    members[0] = image
    np.clip(members, 0, 1, out=members)
    members.setflags(write=False)
    return Orbit(members, point_index)


def orbit_size(spec: TransformSpec, shape=(32, 32, 3)) -> int:
    """Number of members a materialized orbit will have (without building it)."""
    if spec.kind == "precomputed-orbit":
        raise ValueError("the size of a precomputed orbit depends on the point")
    return len(_parameters(spec, shape, 0, 0, 0))


def compose(specs, sample_budget: int = DEFAULT_PRODUCT_BUDGET) -> TransformSpec:
    """Direct product ``g_L o ... o g_1`` of the given specs (applied in order)."""
    specs = list(specs)
    if len(specs) < 2:
        raise ValueError("compose needs at least two specs")
    # every factor must emit the same spatial size
    hw = None
    for s in specs:
        if s.kind == "crop" and s.params["size"] is not None:
            if hw is not None and tuple(s.params["size"]) != hw:
                raise ValueError(f"incompatible crop sizes {hw} and {tuple(s.params['size'])}")
            hw = tuple(s.params["size"])
    return TransformSpec("product", {}, sample_budget, tuple(specs))


# ---------------------------------------------------------------------------
# presets and JSON

_PRESET_NAMES = {
    "identity": "base", "flip-horizontal": "flip", "rotate": "rotate", "crop": "crop",
    "cutout": "cutout", "color-jitter": "colorjitter", "precomputed-orbit": "3dview",
}
PRESETS = {
    "base": "identity", "identity": "identity", "flip": "flip-horizontal", "rotate": "rotate",
    "crop": "crop", "cutout": "cutout", "colorjitter": "color-jitter",
    "3dview": "precomputed-orbit",
}


def preset(name: str, **params) -> TransformSpec:
    """Named presets: base, flip, rotate, crop, cutout, colorjitter, 3dview.

    ``3dview`` needs ``manifest=<orbit manifest path>`` (or the
    ``"3dview:<path>"`` form of :func:`parse_transform`).
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    kind = PRESETS[name]
    budget = params.pop("sample_budget", DEFAULT_BUDGET)
    if kind == "precomputed-orbit" and params.get("manifest") is None and "orbits" not in params:
        raise ValueError("the 3dview preset needs an orbit manifest")
    return TransformSpec(kind, params, budget)


def spec_to_dict(spec: TransformSpec) -> dict:
    params = {}
    for k, v in spec.params.items():
        if k == "orbits":
            params[k] = "<in-memory>"
        else:
            params[k] = list(v) if isinstance(v, tuple) else v
    d = {"kind": spec.kind, "params": params, "sample_budget": spec.sample_budget}
    if spec.factors:
        d["factors"] = [spec_to_dict(f) for f in spec.factors]
    return d


def spec_from_dict(d: Mapping) -> TransformSpec:
    params = {k: tuple(v) if isinstance(v, list) else v for k, v in d.get("params", {}).items()}
    factors = tuple(spec_from_dict(f) for f in d.get("factors", ()))
    budget = d.get("sample_budget", DEFAULT_PRODUCT_BUDGET if factors else DEFAULT_BUDGET)
    return TransformSpec(d["kind"], params, budget, factors)


def spec_to_json(spec: TransformSpec) -> str:
    if "orbits" in spec.params or any("orbits" in f.params for f in spec.factors):
        raise ValueError("specs holding in-memory orbits cannot be serialized")
    return json.dumps(spec_to_dict(spec), sort_keys=True)


def spec_from_json(text: str) -> TransformSpec:
    return spec_from_dict(json.loads(text))


def parse_transform(text: str) -> TransformSpec:
    """Preset name, ``3dview:<manifest>``, inline JSON, or a JSON file path."""
    text = text.strip()
    if text.startswith("{"):
        return spec_from_json(text)
    if text.startswith("3dview:"):
        return preset("3dview", manifest=text.split(":", 1)[1])
    if "+" in text and all(part in PRESETS for part in text.split("+")):
        return compose([preset(part) for part in text.split("+")])
    if text in PRESETS:
        return preset(text)
    path = Path(text)
    if path.is_file():
        return spec_from_json(path.read_text())
    raise ValueError(f"unrecognized transform {text!r}")
