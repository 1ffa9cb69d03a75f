"""Command-line front end: ``coneminq solve|measure|volume|verify|residual|export|replay``.

Exit codes: 0 success, 2 input error, 3 not converged, 4 verification failure.
"""
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import io
from .cone import polar
from .errors import ConeminqError, InputError
from .measures import (dual_entropy, dual_volume, pq_masses, pq_measure,
                       pq_measure_boundary, with_error)
from .monge_ampere import SupportProfile, residual
from .polytope import truncated_facets
from .quadrature import make_grid
from .solver import Problem, SolverConfig, solve, solve_alexandrov

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 2, 3, 4
MATCH_COS = 1 - 1e-9


def _emit(text, output):
    if output:
        io.atomic_write(output, text)


# -- command bodies: (inputs, params, output) -> exit code ------------------

def cmd_solve(inputs, params, output):
    cone = io.load_cone(inputs["cone"])
    mu = io.load_measure(inputs["measure"])
    cfg = SolverConfig(resolution=params["grid"], seed=params["seed"], tol=params["tol"],
                       max_iterations=params["max_iter"])
    p, q = params["p"], params["q"]
    try:
        mu.check_domain(cone)
    except ConeminqError as exc:
        raise InputError(str(exc), "measure.atoms") from exc
    if mu.domain == "omega":
        sol = solve_alexandrov(mu, p, cone, cfg)
        q = 0.0
    else:
        if q is None:
            raise InputError("-q is required for a measure on omega_polar", "q")
        sol = solve(Problem(cone, mu, p, q, params["tau"]), cfg)
    _emit(io.dumps(io.solution_to_dict(sol, p, q)), output)
    click.echo(f"converged={str(sol.converged).lower()} iterations={sol.iterations} "
               f"max_residual={float(np.max(sol.residuals))!r}")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_measure(inputs, params, output):
    P = io.load_polytope(inputs["polytope"])
    p, q = params["p"], params["q"]
    if params["boundary"]:
        mu = pq_measure_boundary(P, p, q)
    else:
        mu = pq_measure(P, p, q, make_grid(P.cone, params["grid"], params["seed"]))
    header = ["facet"] + [f"u{k}" for k in range(P.dim)] + ["mass", "error"]
    rows = [[int(i), *u, m, e]
            for i, u, m, e in zip(mu.facets, mu.directions, mu.masses, mu.errors)]
    text = io.csv_text(header, rows)
    click.echo(text, nl=False)
    if output and str(output).endswith(".json"):
        _emit(io.dumps(io.measure_to_dict(mu)), output)
    else:
        _emit(text, output)
    return EXIT_OK


def cmd_volume(inputs, params, output):
    P = io.load_polytope(inputs["polytope"])
    q = params["q"]
    grid = make_grid(P.cone, params["grid"], params["seed"])
    if q == 0:
        name, (val, err) = "dual_entropy", with_error(lambda P, g: dual_entropy(P, g), P, grid=grid)
    else:
        name, (val, err) = "dual_volume", with_error(dual_volume, P, q, grid=grid)
    text = io.csv_text(["quantity", "q", "value", "error"], [[name, float(q), float(val), float(err)]])
    click.echo(text, nl=False)
    _emit(text, output)
    return EXIT_OK


def cmd_verify(inputs, params, output):
    P = io.load_polytope(inputs["polytope"])
    mu = io.load_measure(inputs["measure"])
    if mu.domain != "omega_polar":
        raise InputError("verify expects a measure on omega_polar", "measure.domain")
    grid = make_grid(P.cone, params["grid"], params["seed"])
    masses = pq_masses(P, params["p"], params["q"], grid)
    errs = np.full(len(mu), np.inf)
    used = np.zeros(P.m, dtype=bool)
    for k, u in enumerate(mu.directions):
        dots = P.normals @ u
        i = int(np.argmax(dots))
        if dots[i] >= MATCH_COS:
            errs[k] = abs(masses[i] - mu.masses[k]) / mu.masses[k]
            used[i] = True
    # mass on facets that the measure does not list counts as a full miss
    extra = bool(np.any((masses > 0) & ~used))
    worst = float(np.max(errs)) if not extra else np.inf
    ok = worst <= params["tol"]
    text = io.csv_text(["atom", "relative_error"], [[k, float(e)] for k, e in enumerate(errs)])
    _emit(text, output)
    click.echo(f"max_relative_error={worst!r} tol={params['tol']!r} "
               f"{'PASS' if ok else 'FAIL'}")
    if extra:
        click.echo("polytope has mass on facets missing from the measure", err=True)
    return EXIT_OK if ok else EXIT_VERIFY


def _polar_arc(cone):
    ang = np.arctan2(*polar(cone).generators[:, ::-1].T) % (2 * np.pi)
    lo, hi = sorted(ang)
    if hi - lo > np.pi:
        lo, hi = hi, lo + 2 * np.pi
    return float(lo), float(hi)


def cmd_residual(inputs, params, output):
    phi, h = io.read_columns(inputs["support"], ["phi", "h"])
    phi_f, f = io.read_columns(inputs["density"], ["phi", "f"])
    if len(phi_f) != len(phi) or np.max(np.abs(phi_f - phi)) > 1e-12 * max(1.0, np.max(np.abs(phi))):
        raise InputError("density samples must share the phi column of the support file",
                         inputs["density"])
    arc = (np.pi, 1.5 * np.pi)
    if inputs.get("cone"):
        cone = io.load_cone(inputs["cone"])
        if cone.dim != 2:
            raise InputError("residual is planar (dim 2)", "cone.dim")
        arc = _polar_arc(cone)
    try:
        prof = SupportProfile(phi, h, arc=arc)
        worst, res = residual(prof, f, params["p"], params["q"])
    except (ValueError, ConeminqError) as exc:
        raise InputError(str(exc), inputs["support"]) from exc
    _emit(io.csv_text(["phi", "residual"], zip(phi, res)), output)
    click.echo(f"max_residual={worst!r}")
    return EXIT_OK


def cmd_export(inputs, params, output):
    P = io.load_polytope(inputs["polytope"])
    if P.dim != 3:
        raise InputError("OBJ export needs n = 3", "polytope.cone.dim")
    if params["t"] <= 0:
        raise InputError("truncation height must be positive", "t")
    polys = truncated_facets(P, params["t"])
    _emit(io.obj_text(polys), output)
    click.echo(f"facets={len(polys)}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "measure": cmd_measure, "volume": cmd_volume,
    "verify": cmd_verify, "residual": cmd_residual, "export": cmd_export,
}


def _resolve(inputs):
    return {k: (str(Path(v).resolve()) if v else v) for k, v in inputs.items()}


def run(command, inputs, params, output):
    """Run a command body, write its manifest, return the exit code."""
    inputs = _resolve(inputs)
    start = time.perf_counter()
    try:
        code = COMMANDS[command](inputs, params, output)
    except InputError as exc:
        click.echo(f"input error: {exc}", err=True)
        return EXIT_INPUT
    except (ConeminqError, ValueError) as exc:
        click.echo(f"input error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INPUT
    if output:
        out = str(Path(output).resolve())
        io.save_manifest(io.RunManifest(command, inputs, params, [out], io.tool_version(),
                                        time.perf_counter() - start), out)
    return code


def _finish(code):
    sys.exit(code)


# -- click wiring -----------------------------------------------------------

_path = click.Path(exists=True, dir_okay=False)
grid_opt = click.option("--grid", default=1024, show_default=True, help="Quadrature resolution.")
seed_opt = click.option("--seed", default=0, show_default=True, help="Seed for random grids.")
out_opt = click.option("-o", "output", type=click.Path(dir_okay=False), default=None,
                       help="Output file.")


@click.group()
@click.version_option(io.tool_version(), prog_name="coneminq")
def main():
    """Dual curvature measures and the L_p dual Minkowski problem on cones."""


@main.command("solve")
@click.option("--measure", type=_path, required=True)
@click.option("--cone", type=_path, required=True)
@click.option("-p", "p", type=float, required=True)
@click.option("-q", "q", type=float, default=None)
@grid_opt
@seed_opt
@click.option("--tol", default=1e-7, show_default=True, help="Relative residual tolerance.")
@click.option("--tau", default=0.0, show_default=True, help="Interior margin of the atoms.")
@click.option("--max-iter", default=500, show_default=True)
@click.option("-o", "output", type=click.Path(dir_okay=False), required=True)
def solve_cmd(measure, cone, p, q, grid, seed, tol, tau, max_iter, output):
    """Solve for a polytope with the prescribed measure."""
    _finish(run("solve", {"measure": measure, "cone": cone},
                {"p": p, "q": q, "grid": grid, "seed": seed, "tol": tol, "tau": tau,
                 "max_iter": max_iter}, output))


@main.command("measure")
@click.option("--polytope", type=_path, required=True)
@click.option("-p", "p", type=float, required=True)
@click.option("-q", "q", type=float, required=True)
@grid_opt
@seed_opt
@click.option("--boundary", is_flag=True, help="Use facet integrals instead of quadrature.")
@out_opt
def measure_cmd(polytope, p, q, grid, seed, boundary, output):
    """Print the (p, q) dual curvature measure as CSV."""
    _finish(run("measure", {"polytope": polytope},
                {"p": p, "q": q, "grid": grid, "seed": seed, "boundary": boundary}, output))


@main.command("volume")
@click.option("--polytope", type=_path, required=True)
@click.option("-q", "q", type=float, required=True)
@grid_opt
@seed_opt
@out_opt
def volume_cmd(polytope, q, grid, seed, output):
    """Dual volume (or dual entropy for q = 0)."""
    _finish(run("volume", {"polytope": polytope}, {"q": q, "grid": grid, "seed": seed}, output))


@main.command("verify")
@click.option("--polytope", type=_path, required=True)
@click.option("--measure", type=_path, required=True)
@click.option("-p", "p", type=float, required=True)
@click.option("-q", "q", type=float, required=True)
@grid_opt
@seed_opt
@click.option("--tol", default=1e-6, show_default=True)
@out_opt
def verify_cmd(polytope, measure, p, q, grid, seed, tol, output):
    """Compare a polytope's measure with a measure file."""
    _finish(run("verify", {"polytope": polytope, "measure": measure},
                {"p": p, "q": q, "grid": grid, "seed": seed, "tol": tol}, output))


@main.command("residual")
@click.option("--support", type=_path, required=True, help="CSV with columns phi,h.")
@click.option("--density", type=_path, required=True, help="CSV with columns phi,f.")
@click.option("-p", "p", type=float, required=True)
@click.option("-q", "q", type=float, required=True)
@click.option("--cone", type=_path, default=None, help="Planar cone (default: orthant).")
@out_opt
def residual_cmd(support, density, p, q, cone, output):
    """Planar Monge-Ampere residual of a sampled support function."""
    _finish(run("residual", {"support": support, "density": density, "cone": cone},
                {"p": p, "q": q}, output))


@main.command("export")
@click.option("--polytope", type=_path, required=True)
@click.option("-t", "t", type=float, required=True, help="Truncation height.")
@click.option("-o", "output", type=click.Path(dir_okay=False), required=True)
def export_cmd(polytope, t, output):
    """Write an OBJ mesh of the truncated boundary (n = 3)."""
    _finish(run("export", {"polytope": polytope}, {"t": t}, output))


@main.command("replay")
@click.argument("manifest", type=_path)
@out_opt
def replay_cmd(manifest, output):
    """Re-run the command recorded in a manifest."""
    try:
        m = io.load_manifest(manifest)
    except InputError as exc:
        click.echo(f"input error: {exc}", err=True)
        _finish(EXIT_INPUT)
    if m.command not in COMMANDS:
        click.echo(f"input error: unknown command {m.command!r}", err=True)
        _finish(EXIT_INPUT)
    target = output or (m.outputs[0] if m.outputs else None)
    _finish(run(m.command, m.inputs, m.params, target))


if __name__ == "__main__":
    main()
