"""JSON/NPZ serialization, run manifests and SVG rendering."""

from __future__ import annotations

import hashlib
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import DIRS, Direction, is_a_face_array, white_coords
from .sampler import DimerConfig, RandomSeed, ResourceError
from .temperley import OrientedForest, backbone, temperley_graph

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


def _check(doc: dict, kind: str) -> None:
    if doc.get("schema") != kind:
        raise SchemaError(f"expected schema {kind!r}, got {doc.get('schema')!r}")
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported {kind} version {doc.get('version')!r}")


# --- configurations and forests ------------------------------------------------


def config_to_json(d: DimerConfig) -> dict:
    seed = None if d.seed is None else [d.seed.seed, d.seed.stream]
    return {
        "schema": "aztec2p.dimer",
        "version": SCHEMA_VERSION,
        "n": d.n,
        "a": d.a,
        "seed": seed,
        "dirs": "".join("0123"[int(c)] for c in d.dirs),
    }


def config_from_json(doc: dict) -> DimerConfig:
    _check(doc, "aztec2p.dimer")
    dirs = np.frombuffer(doc["dirs"].encode("ascii"), dtype=np.uint8) - ord("0")
    seed = None if doc.get("seed") is None else RandomSeed(*doc["seed"])
    d = DimerConfig(int(doc["n"]), float(doc["a"]), dirs.astype(np.int8), seed)
    if not d.is_valid():
        raise SchemaError("stored directions do not form a perfect matching")
    return d


def forest_to_json(f: OrientedForest) -> dict:
    return {
        "schema": "aztec2p.forest",
        "version": SCHEMA_VERSION,
        "direction": f.direction.value,
        "n": f.n,
        "a": f.a,
        "parent": [int(p) for p in f.parent],
    }


def forest_from_json(doc: dict) -> OrientedForest:
    _check(doc, "aztec2p.forest")
    g = temperley_graph(Direction(doc["direction"]), int(doc["n"]))
    parent = np.asarray(doc["parent"], dtype=np.int64)
    if parent.shape != (len(g.vertices),):
        raise SchemaError("parent array does not match the vertex set")
    return OrientedForest(g, parent, float(doc["a"]))


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_config(d: DimerConfig, path) -> Path:
    """JSON, or a compact NPZ when the suffix is ``.npz``."""
    path = Path(path)
    if path.suffix == ".npz":
        seed = np.array([-1, -1] if d.seed is None else [d.seed.seed, d.seed.stream], dtype=np.int64)
        with open(path, "wb") as fh:
            np.savez_compressed(
                fh, version=SCHEMA_VERSION, n=d.n, a=d.a, seed=seed, dirs=d.dirs.astype(np.int8)
            )
    else:
        path.write_text(_dump(config_to_json(d)))
    return path


def load_config(path) -> DimerConfig:
    path = Path(path)
    if path.suffix == ".npz":
        z = np.load(path)
        if int(z["version"]) != SCHEMA_VERSION:
            raise SchemaError(f"unsupported npz version {int(z['version'])}")
        s = z["seed"]
        seed = None if s[0] < 0 else RandomSeed(int(s[0]), int(s[1]))
        return DimerConfig(int(z["n"]), float(z["a"]), z["dirs"].astype(np.int8), seed)
    return config_from_json(json.loads(path.read_text()))


def save_forest(f: OrientedForest, path) -> Path:
    path = Path(path)
    path.write_text(_dump(forest_to_json(f)))
    return path


def load_forest(path) -> OrientedForest:
    return forest_from_json(json.loads(Path(path).read_text()))


# --- manifests -------------------------------------------------------------------


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def module_versions() -> dict:
    import numba
    import scipy

    return {
        "aztec2p": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
    }


@dataclass
class RunManifest:
    """What a CLI run needs to be replayed: the command, its parameters and
    digests of its inputs, outputs and printed text."""

    command: str
    params: dict
    n: int | None = None
    a: float | None = None
    seed: int | None = None
    versions: dict = field(default_factory=module_versions)
    started: str = ""
    finished: str = ""
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    stdout_sha256: str = ""

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["schema"] = "aztec2p.manifest"
        doc["version"] = SCHEMA_VERSION
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "RunManifest":
        _check(doc, "aztec2p.manifest")
        body = {k: v for k, v in doc.items() if k not in ("schema", "version")}
        return cls(**body)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls.from_json(json.loads(Path(path).read_text()))


def timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


# --- SVG -------------------------------------------------------------------------

DARK = "#4a4a4a"
LIGHT = "#d9d9d9"
SOUTH = "#1f4fd1"
NORTH = "#d1261f"
REGION = "#2ca02c"


@dataclass(frozen=True)
class SvgStyle:
    scale: float = 10.0
    stroke: float = 0.08
    path_width: float = 0.18
    max_elements: int = 2_000_000


def _pq(xy) -> np.ndarray:
    """Rotate the lattice so that vertex squares become unit cells."""
    xy = np.asarray(xy, dtype=float)
    return np.stack([(xy[..., 0] + xy[..., 1]) / 2, (xy[..., 0] - xy[..., 1]) / 2], axis=-1)


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _polyline(pts, color: str, width: float, cls: str) -> str:
    q = _pq(pts)
    coords = " ".join(f"{_fmt(p)},{_fmt(-r)}" for p, r in q)
    return (
        f'<polyline class="{cls}" points="{coords}" fill="none" stroke="{color}" '
        f'stroke-width="{_fmt(width)}" stroke-linejoin="round"/>'
    )


def render_svg(
    d: DimerConfig,
    forests=(),
    backbone_paths: bool = False,
    regions=(),
    style: SvgStyle | None = None,
) -> str:
    """SVG of a configuration with optional forest, backbone and region overlays.

    Dominoes are rectangles, a-dominoes dark and the rest light; south paths
    are blue and north paths red; regions are translucent polygons.
    """
    from .scaling import region_polygons

    style = style or SvgStyle()
    n = d.n
    count = len(d.dirs)
    count += sum(int((f.parent >= 0).sum()) for f in forests)
    count += n * len(forests) if backbone_paths else 0
    if count > style.max_elements:
        raise ResourceError(f"{count} elements exceed the cap of {style.max_elements}")

    w = white_coords(n)
    e = DIRS[d.dirs]
    heavy = is_a_face_array(w[:, 0] + e[:, 0], w[:, 1]) | is_a_face_array(w[:, 0], w[:, 1] + e[:, 1])
    b = w + e
    pw, pb = _pq(w), _pq(b)
    lo = np.minimum(pw, pb) - 0.5
    hi = np.maximum(pw, pb) + 0.5
    half = n + 1.0
    s = style.scale
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(2 * half * s)}" '
        f'height="{_fmt(2 * half * s)}" viewBox="{_fmt(-half)} {_fmt(-half)} {_fmt(2 * half)} {_fmt(2 * half)}">',
        f'<g stroke="#ffffff" stroke-width="{_fmt(style.stroke)}">',
    ]
    for (x0, y0), (x1, y1), h in zip(lo, hi, heavy):
        out.append(
            f'<rect class="domino" x="{_fmt(x0)}" y="{_fmt(-y1)}" width="{_fmt(x1 - x0)}" '
            f'height="{_fmt(y1 - y0)}" fill="{DARK if h else LIGHT}"/>'
        )
    out.append("</g>")
    for f in forests:
        color = SOUTH if f.direction == Direction.S else NORTH
        verts = f.graph.vertices
        out.append(f'<g class="forest-{f.direction.value}">')
        for i in np.nonzero(f.parent >= 0)[0]:
            out.append(_polyline([verts[i], verts[f.parent[i]]], color, style.path_width, "edge"))
        out.append("</g>")
    if backbone_paths:
        for f in forests:
            color = SOUTH if f.direction == Direction.S else NORTH
            paths, _ = backbone(f)
            out.append(f'<g class="backbone-{f.direction.value}">')
            for p in paths:
                out.append(_polyline(p.vertices, color, 3 * style.path_width, "backbone"))
            out.append("</g>")
    for r in regions:
        for poly in region_polygons(r):
            q = _pq(poly)
            coords = " ".join(f"{_fmt(p)},{_fmt(-t)}" for p, t in q)
            out.append(
                f'<polygon class="region" data-name="{r.name}" points="{coords}" '
                f'fill="{REGION}" fill-opacity="0.25" stroke="{REGION}" stroke-width="{_fmt(style.path_width)}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


__all__ = [
    "RunManifest",
    "SchemaError",
    "SvgStyle",
    "config_from_json",
    "config_to_json",
    "forest_from_json",
    "forest_to_json",
    "load_config",
    "load_forest",
    "module_versions",
    "render_svg",
    "save_config",
    "save_forest",
    "sha256_file",
]
