"""Command-line interface.

Every subcommand can write a manifest (``aztec2p --manifest run.json ...``)
holding its parameters and digests of its inputs, outputs and printed text;
``aztec2p replay run.json`` re-runs it into a scratch directory and compares.
"""

from __future__ import annotations

import configparser
import csv
import functools
import io as _io
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import kasteleyn, scaling
from .io import (
    RunManifest,
    SchemaError,
    SvgStyle,
    load_config,
    render_svg,
    save_config,
    save_forest,
    sha256_file,
    sha256_text,
    timestamp,
)
from .lattice import LatticeError
from .sampler import RandomSeed, ResourceError

THREADS_ENV = "AZTEC2P_THREADS"

# rejected inputs and computations exit with status 1 and a one-line message
LIBRARY_ERRORS = (
    LatticeError,
    ResourceError,
    SchemaError,
    kasteleyn.NumericError,
    kasteleyn.DomainError,
    scaling.DomainError,
)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def pmap(fn, items, workers: int | None = None) -> list:
    """Ordered map over a process pool; results do not depend on ``workers``."""
    items = list(items)
    workers = workers or default_threads()
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def read_settings(path) -> dict:
    """Key-value settings: [quadrature] nodes/radius/tol/max_nodes,
    [airy] panel_nodes/nystrom_nodes/span/tail/max_cutoff/stable_tol,
    [regions] gamma_a."""
    out = {"quadrature": {}, "airy": {}, "regions": {}}
    if path is None:
        return out
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    casts = {
        "quadrature": {"nodes": int, "radius": float, "tol": float, "max_nodes": int},
        "airy": {
            "panel_nodes": int, "nystrom_nodes": int, "span": float, "tail": float,
            "max_cutoff": float, "stable_tol": float,
        },
        "regions": {"gamma_a": float},
    }
    for sec, keys in casts.items():
        if cp.has_section(sec):
            for k, v in cp.items(sec):
                if k not in keys:
                    raise click.UsageError(f"unknown setting [{sec}] {k}")
                out[sec][k] = keys[k](v)
    return out


# --- manifest plumbing ------------------------------------------------------------


def _argv_from_params(cmd: click.Command, params: dict) -> list[str]:
    argv = [cmd.name]
    for p in cmd.params:
        v = params.get(p.name)
        if isinstance(p, click.Argument):
            if v is not None:
                argv.append(str(v))
            continue
        flag = p.opts[0]
        if p.is_flag:
            if v:
                argv.append(flag)
        elif p.multiple:
            for item in v or ():
                argv += [flag, str(item)]
        elif p.nargs > 1 and v is not None:
            argv += [flag, *(str(item) for item in v)]
        elif v is not None:
            argv += [flag, str(v)]
    return argv


def recorded(inputs=(), outputs=()):
    """Wrap a command so that it records a manifest when asked to."""

    def deco(fn):
        @functools.wraps(fn)
        @click.pass_context
        def wrapper(ctx, **params):
            obj = ctx.ensure_object(dict)
            obj["lines"] = []
            started = timestamp()
            try:
                fn(**params)
            except LIBRARY_ERRORS as exc:
                raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc
            path = obj.get("manifest")
            if not path:
                return
            cmd = ctx.command
            man = RunManifest(
                command=cmd.name,
                params={
                    "argv": _argv_from_params(cmd, params),
                    "settings": obj.get("settings_path"),
                },
                n=params.get("n"),
                a=params.get("a"),
                seed=params.get("seed"),
                started=started,
                finished=timestamp(),
                inputs={k: [str(params[k]), sha256_file(params[k])] for k in inputs if params.get(k)},
                outputs={k: [str(params[k]), sha256_file(params[k])] for k in outputs if params.get(k)},
                stdout_sha256=sha256_text("\n".join(obj["lines"])),
            )
            if obj.get("settings_path"):
                man.inputs["settings"] = [obj["settings_path"], sha256_file(obj["settings_path"])]
            man.save(path)

        return wrapper

    return deco


def say(text: str) -> None:
    ctx = click.get_current_context()
    ctx.ensure_object(dict).setdefault("lines", []).append(text)
    click.echo(text)


def settings() -> dict:
    return click.get_current_context().ensure_object(dict).get("settings") or read_settings(None)


def replay_manifest(path) -> tuple[bool, str]:
    """Re-run a recorded command with outputs redirected to a scratch directory."""
    from click.testing import CliRunner

    man = RunManifest.load(path)
    for k, (p, digest) in man.inputs.items():
        if not Path(p).exists() or sha256_file(p) != digest:
            return False, f"input {k} ({p}) changed or missing"
    argv = list(man.params["argv"])
    scratch = Path(tempfile.mkdtemp(prefix="aztec2p-replay-"))
    try:
        moved = {}
        for k, (p, _) in man.outputs.items():
            q = str(scratch / Path(p).name)
            moved[k] = q
            argv = [q if s == p else s for s in argv]
        pre = ["--settings", man.params["settings"]] if man.params.get("settings") else []
        res = CliRunner().invoke(main, [*pre, "--manifest", str(scratch / "m.json"), *argv])
        if res.exit_code != 0:
            return False, f"replay exited with {res.exit_code}: {res.output[-300:]}"
        again = RunManifest.load(scratch / "m.json")
        for k, (p, digest) in man.outputs.items():
            if sha256_file(moved[k]) != digest:
                return False, f"output {k} differs"
        if again.stdout_sha256 != man.stdout_sha256:
            return False, "printed output differs"
        return True, "identical"
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


# --- commands -----------------------------------------------------------------------


@click.group()
@click.option("--manifest", type=click.Path(dir_okay=False), default=None, help="Write a run manifest here.")
@click.option("--settings", "settings_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Key-value settings file for quadrature and Airy defaults.")
@click.pass_context
def main(ctx, manifest, settings_path):
    """Two-periodic Aztec diamond: sampling, forests, kernels and statistics."""
    obj = ctx.ensure_object(dict)
    obj["manifest"] = manifest
    obj["settings_path"] = settings_path
    obj["settings"] = read_settings(settings_path)


@main.command()
@click.option("--n", type=int, required=True)
@click.option("--a", type=float, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--stream", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help=".json or .npz")
@recorded(outputs=("out",))
def sample(n, a, seed, stream, out):
    """Draw an exact weighted sample by domino shuffling."""
    from .sampler import config_log_weight
    from .sampler import sample as draw

    d = draw(n, a, seed=RandomSeed(seed, stream))
    save_config(d, out)
    say(f"n={n} a={a} seed={seed} stream={stream} log-weight={config_log_weight(d):.6f} -> {Path(out).name}")


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--forests", is_flag=True, help="Overlay south and north forests.")
@click.option("--backbone", is_flag=True, help="Overlay backbone paths (needs --forests).")
@click.option("--region", multiple=True, help="Region overlay, e.g. RS_n or Meso_n.")
@click.option("--scale", type=float, default=10.0, show_default=True)
@click.option("--max-elements", type=int, default=2_000_000, show_default=True)
@recorded(inputs=("config",), outputs=("out",))
def render(config, out, forests, backbone, region, scale, max_elements):
    """Render a configuration as SVG."""
    from .scaling import RegionSpec
    from .temperley import north_forest, south_forest

    d = load_config(config)
    fs = (south_forest(d), north_forest(d)) if forests or backbone else ()
    gamma_a = settings()["regions"].get("gamma_a", 0.0)
    regs = [RegionSpec(r, d.n, d.a, gamma_a) for r in region]
    svg = render_svg(d, fs, backbone_paths=backbone, regions=regs,
                     style=SvgStyle(scale=scale, max_elements=max_elements))
    Path(out).write_text(svg)
    count = svg.count('class="domino"')
    say(f"wrote {Path(out).name} ({count} dominoes)")


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--direction", type=click.Choice(["S", "N"]), default="S", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@recorded(inputs=("config",), outputs=("out",))
def forest(config, direction, out):
    """Temperley forest of a configuration, with validation and split point."""
    from .temperley import backbone as bb
    from .temperley import forest as make
    from .temperley import validate_dcf

    d = load_config(config)
    f = make(d, direction)
    rep = validate_dcf(f)
    paths, sp = bb(f)
    if out:
        save_forest(f, out)
    say(f"direction={direction} valid={bool(rep)} split={sp.I} backbone_paths={len(paths)}")
    for tag, msg in rep.violations:
        say(f"violation ({tag}): {msg}")


@main.command()
@click.option("--n", type=int, required=True)
@click.option("--a", type=float, required=True)
@click.option("--method", type=click.Choice(["direct", "formula", "both"]), default="both", show_default=True)
@click.option("--entries", type=int, default=3, show_default=True, help="Entries per parity class.")
@recorded()
def kernel(n, a, method, entries):
    """Inverse Kasteleyn entries by dense inversion and/or the contour formula."""
    from .acceptance import formula_entries
    from .kasteleyn import K_inverse_formula, QuadratureSpec, build_K

    q = settings()["quadrature"]
    quad = QuadratureSpec(**q) if q else None
    K = build_K(n, a) if method in ("direct", "both") else None
    worst = 0.0
    say("white\tblack\tdirect\tformula")
    for x, y in formula_entries(n, entries):
        dv = K.kinv(x, y) if K is not None else None
        fv = K_inverse_formula(n, a, x, y, quad) if method in ("formula", "both") else None
        if dv is not None and fv is not None:
            worst = max(worst, abs(dv - fv))
        fmt = lambda z: "-" if z is None else f"{z.real:+.12e}{z.imag:+.12e}j"
        say(f"{x}\t{y}\t{fmt(dv)}\t{fmt(fv)}")
    if method == "both":
        say(f"max abs diff {worst:.3e}")


def _hm_row(args):
    from .heights import central_height, height_field
    from .sampler import sample as draw
    from .temperley import south_forest, split_point

    n, a, s = args
    d = draw(n, a, seed=s)
    H = central_height(height_field(d))
    I = split_point(south_forest(d))
    return H, I


def _bt_row(args):
    from .scaling import RegionSpec, backtrack_stat, south_path
    from .sampler import sample as draw
    from .temperley import south_forest, split_point

    n, a, s, kmax = args
    f = south_forest(draw(n, a, seed=s))
    I = split_point(f)
    reg = RegionSpec("RS_n*", n, a)
    return [backtrack_stat(south_path(f, I - k), reg) if I - k >= 1 else -math.inf for k in range(kmax + 1)]


def _airy_row(args):
    from .sampler import sample as draw
    from .scaling import extract_airy_paths, scaling_frame
    from .temperley import south_forest

    n, a, s, times, count = args
    r = extract_airy_paths(south_forest(draw(n, a, seed=s)), scaling_frame(a), times, count=count)
    return r.upper, r.lower


def _onion_row(args):
    from .sampler import sample as draw
    from .scaling import onion_scan
    from .temperley import backbone as bb
    from .temperley import south_forest

    n, a, s, r1, r2, centers = args
    paths, _ = bb(south_forest(draw(n, a, seed=s)))
    reps = onion_scan([p.vertices for p in paths], r1, r2, centers)
    return sum(r.found for r in reps), max((r.layers for r in reps if r.found), default=0)


@main.command()
@click.option("--check", type=click.Choice(["heightmatch", "backtrack", "airy", "onion"]), required=True)
@click.option("--n", type=int, required=True)
@click.option("--a", type=float, default=0.5, show_default=True)
@click.option("--samples", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV table.")
@click.option("--times", type=float, multiple=True, help="Airy times (default -1 -0.5 0 0.5 1).")
@click.option("--paths", type=int, default=2, show_default=True, help="Airy paths per sample.")
@click.option("--r2", type=float, default=1.0, show_default=True, help="Onion box half-height.")
@click.option("--layers", type=int, default=1, show_default=True, help="Onion layer count in the width rule.")
@click.option("--workers", type=int, default=None, help=f"Process pool size (default ${THREADS_ENV} or 1).")
@recorded(outputs=("out",))
def stats(check, n, a, samples, seed, out, times, paths, r2, layers, workers):
    """Monte Carlo statistics of backbone paths."""
    seeds = RandomSeed(seed).spawn(samples)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if check == "heightmatch":
        rows = pmap(_hm_row, [(n, a, s) for s in seeds], workers)
        w.writerow(["sample", "H", "I", "match"])
        hits = 0
        for k, (H, I) in enumerate(rows):
            m = H == 4 * I - n - 1
            hits += m
            w.writerow([k, H, I, int(m)])
        say(f"heightmatch n={n} a={a}: {hits}/{samples} = {hits / samples:.3f}")
    elif check == "backtrack":
        from .scaling import backtrack_bound

        rows = pmap(_bt_row, [(n, a, s, 3) for s in seeds], workers)
        bounds = [backtrack_bound(n, k) for k in range(4)]
        w.writerow(["sample", "k", "stat", "bound"])
        for i, r in enumerate(rows):
            for k, v in enumerate(r):
                w.writerow([i, k, v, f"{bounds[k]:.6f}"])
        arr = np.array(rows)
        frac = np.mean(arr < np.array(bounds)[None, :], axis=0)
        say(f"backtrack n={n} a={a}: within-bound fraction k=0..3 " + " ".join(f"{f:.3f}" for f in frac))
    elif check == "airy":
        from .airy import top_path_test

        ts = list(times) or [-1.0, -0.5, 0.0, 0.5, 1.0]
        rows = pmap(_airy_row, [(n, a, s, ts, paths) for s in seeds], workers)
        w.writerow(["sample", "t", "i", "upper", "lower"])
        for k, (up, lo) in enumerate(rows):
            for i in range(paths):
                for j, t in enumerate(ts):
                    w.writerow([k, t, i + 1, repr(float(up[i, j])), repr(float(lo[i, j]))])
        j0 = int(np.argmin(np.abs(np.array(ts))))
        top = np.array([up[0, j0] for up, _ in rows])
        fin = top[np.isfinite(top)]
        msg = f"airy n={n} a={a}: A1+({ts[j0]:g}) mean {fin.mean():.4f} over {len(fin)}/{samples} present"
        if samples >= 100:
            rep = top_path_test(top)
            msg += f"; KS vs F2 {rep.statistic:.4f} (band {rep.band})"
        say(msg)
    else:
        from .scaling import limit_curve_point

        r1 = 10 * layers * math.sqrt(r2) * math.log(n) ** 2
        centers = [tuple(n * limit_curve_point(t, a)) for t in np.linspace(-0.2, 0.2, 9)]
        rows = pmap(_onion_row, [(n, a, s, r1, r2, centers) for s in seeds], workers)
        w.writerow(["sample", "detections", "max_layers"])
        for k, (cnt, lay) in enumerate(rows):
            w.writerow([k, cnt, lay])
        det = sum(1 for c, _ in rows if c)
        say(f"onion n={n} a={a} r1={r1:.2f} r2={r2:g}: detections in {det}/{samples} samples")
    if out:
        Path(out).write_text(buf.getvalue())


@main.command()
@click.option("--s", "points", type=float, multiple=True, help="Evaluate F2 at these points.")
@click.option("--kernel", "kargs", type=float, nargs=4, default=None, help="tau1 zeta1 tau2 zeta2")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@recorded(outputs=("out",))
def airy(points, kargs, out):
    """Tracy-Widom F2 values and extended Airy kernel entries."""
    from .airy import AiryKernelSpec, airy_kernel, fredholm_gap

    spec = AiryKernelSpec(**settings()["airy"])
    pts = list(points) or list(np.arange(-6.0, 3.01, 0.5))
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "F2"])
    for s in pts:
        v = fredholm_gap(s, spec)
        w.writerow([s, repr(v)])
        say(f"F2({s:g}) = {v:.10f}")
    if kargs:
        say(f"A({kargs[0]:g},{kargs[1]:g};{kargs[2]:g},{kargs[3]:g}) = {airy_kernel(*kargs, spec):.12e}")
    if out:
        Path(out).write_text(buf.getvalue())


@main.command()
@click.option("--quick", is_flag=True, help="Only the exhaustive n=4 suite.")
@click.option("--criteria", default=None, help="Comma-separated criterion numbers.")
def verify(quick, criteria):
    """Run the acceptance checks; exit status 1 if any fails."""
    from .acceptance import run

    nums = [int(c) for c in criteria.split(",")] if criteria else None
    res = run(nums, quick=quick, echo=click.echo)
    failed = [r for r in res if not r.passed]
    click.echo(f"{len(res) - len(failed)}/{len(res)} passed")
    sys.exit(1 if failed else 0)


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
def replay(manifest):
    """Re-run a recorded command and compare every digest."""
    ok, why = replay_manifest(manifest)
    click.echo(why)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
