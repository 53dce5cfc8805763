"""CLI entry point for heisenberg-freiman."""

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import typer
from pydantic import BaseModel

from heisenberg_freiman import __version__
from heisenberg_freiman.config import Budgets, HarnessConfig
from heisenberg_freiman.counting import (
    exception_report_json,
    exception_set,
    rep_counts_N,
    rep_counts_r,
    verify_parseval,
    verify_vinogradov,
)
from heisenberg_freiman.exact import parse_rational, require_prime_modulus
from heisenberg_freiman.freiman import (
    MIN_AUDIT_S,
    FiberAnchor,
    NotFreimanHomomorphismError,
    check_freiman_homomorphism,
    check_freiman_isomorphism,
    model_audit,
    read_map_file,
)
from heisenberg_freiman.groups import read_table_file
from heisenberg_freiman.incidence import (
    HyperplaneSet,
    PointSet,
    count_incidences,
    energy_to_incidence,
    read_instance_file,
    verify_vinh,
)
from heisenberg_freiman.model_registry import ModelRegistry
from heisenberg_freiman.pipeline import constants as compute_constants
from heisenberg_freiman.pipeline import run_harness, run_step2
from heisenberg_freiman.reports import ReportEnvelope
from heisenberg_freiman.sets import (
    BudgetExceededError,
    GroupSet,
    build_slab,
    doubling_stats,
    extract_fibers,
    read_set_file,
    sample_subset,
    slab_width,
)

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="heisenberg-freiman",
    help=(
        "Product sets, representation counts, Freiman checks and proof "
        "harnesses for dense subsets of the Heisenberg group over F_p."
    ),
    add_completion=False,
)

EXIT_FAILURE = 1
EXIT_USAGE = 2

JSON_OPTION = typer.Option(None, "--json", help="Write the JSON report to this path ('-' for stdout)")
THREADS_OPTION = typer.Option(1, "--threads", min=1, help="Worker threads for product sets and counting")


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log stage details"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only log errors"),
) -> None:
    level = logging.DEBUG if verbose else logging.ERROR if quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


# =============================================================================
# Helpers
# =============================================================================


@contextmanager
def _usage_errors() -> Iterator[None]:
    """Map input, config and budget errors to exit code 2."""
    try:
        yield
    except BudgetExceededError as e:
        typer.echo(f"Budget exceeded: {e}", err=True)
        raise typer.Exit(EXIT_USAGE) from e
    except FileNotFoundError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_USAGE) from e
    except (ValueError, KeyError) as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_USAGE) from e


def _rational(text: str | None, num: int | None, den: int | None, name: str) -> Fraction | None:
    """A rational from "num/den" or from a --x-num/--x-den pair."""
    if text is not None and (num is not None or den is not None):
        raise ValueError(f"Give --{name} or --{name}-num/--{name}-den, not both")
    if text is not None:
        return parse_rational(text)
    if num is None and den is None:
        return None
    if num is None or den is None:
        raise ValueError(f"--{name}-num and --{name}-den go together")
    if den == 0:
        raise ValueError(f"--{name}-den must be nonzero")
    return Fraction(num, den)


def _int_list(text: str, name: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as e:
        raise ValueError(f"--{name} must be a comma-separated list of integers") from e


def _payload(value: BaseModel | dict) -> dict:
    return value.model_dump(mode="json") if isinstance(value, BaseModel) else value


def _emit(
    command: str,
    payload: BaseModel | dict,
    json_path: str | None,
    *,
    config: dict | None = None,
    sidecars: list[str] | None = None,
) -> None:
    envelope = ReportEnvelope(
        tool_version=__version__,
        command=command,
        config=config or {},
        payload=_payload(payload),
        sidecars=sidecars or [],
    )
    text = envelope.model_dump_json(indent=2)
    if json_path == "-":
        sys.stdout.write(text + "\n")
        return
    if json_path is not None:
        Path(json_path).write_text(text + "\n")
        typer.echo(f"Report written to {json_path}")
        return
    for key, value in envelope.payload.items():
        if not isinstance(value, dict | list):
            typer.echo(f"{key}: {value}")


def _load_set(
    set_path: Path | None,
    p: int | None,
    m: int | None,
    alpha: Fraction | None,
    theta: str | None,
    seed: int,
) -> tuple[GroupSet, dict]:
    """A set from a set file, or the slab of width m (or ceil(p^alpha)), optionally sampled."""
    if set_path is not None:
        if p is not None or m is not None or alpha is not None:
            raise ValueError("Give either --set or --p with --m/--alpha")
        A = read_set_file(set_path)
        return A, {"set": str(set_path), "size": A.size}
    if p is None:
        raise ValueError("Give --set or --p")
    if m is None:
        if alpha is None:
            raise ValueError("Give --m or --alpha with --p")
        if not 0 <= alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        m = slab_width(p, alpha)
    A = build_slab(p, m)
    echo = {"p": p, "m": m, "size_A0": A.size}
    if alpha is not None:
        echo["alpha"] = f"{alpha.numerator}/{alpha.denominator}"
    if theta is not None:
        A = sample_subset(A, parse_rational(theta), seed)
        echo.update(theta=theta, seed=seed)
    echo["size"] = A.size
    return A, echo


SET_OPTION = typer.Option(None, "--set", help="Set file ('p=<p>' then 'x y z' rows)")
P_OPTION = typer.Option(None, "--p", help="Prime of Heisenberg(p)")
M_OPTION = typer.Option(None, "--m", help="Slab width: A0 = {[x,y,z] : 0 <= x < m}")
ALPHA_OPTION = typer.Option(None, "--alpha", help="Slab exponent as num/den; m = ceil(p^alpha)")
ALPHA_NUM_OPTION = typer.Option(None, "--alpha-num")
ALPHA_DEN_OPTION = typer.Option(None, "--alpha-den")
THETA_SAMPLE_OPTION = typer.Option(None, "--theta", help="Sample ceil(|A0|^theta) elements (num/den)")
SEED_OPTION = typer.Option(0, "--seed", help="Sampling seed")


# =============================================================================
# Commands
# =============================================================================


@app.command()
def version() -> None:
    """Show the version of heisenberg-freiman."""
    typer.echo(__version__)


@app.command()
def doubling(
    set_path: Path | None = SET_OPTION,
    p: int | None = P_OPTION,
    m: int | None = M_OPTION,
    alpha: str | None = ALPHA_OPTION,
    alpha_num: int | None = ALPHA_NUM_OPTION,
    alpha_den: int | None = ALPHA_DEN_OPTION,
    threads: int = THREADS_OPTION,
    json_path: str | None = JSON_OPTION,
) -> None:
    """|A| and |AA| for a set file or a slab A0."""
    with _usage_errors():
        a = _rational(alpha, alpha_num, alpha_den, "alpha")
        A, echo = _load_set(set_path, p, m, a, None, 0)
        report = doubling_stats(A, budget=Budgets().with_environment().product_set, threads=threads)
    payload = report.model_dump(mode="json")
    if set_path is None:
        # |A0 A0| = (2m - 1) p^2 while the slab doubles without wrapping
        if 2 * echo["m"] - 1 <= p:
            expected = 2 * A.size - p * p
            payload.update(expected_size_AA=expected, slab_identity_holds=report.size_AA == expected)
    _emit("doubling", payload, json_path, config=echo)
    if payload.get("slab_identity_holds") is False:
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def harness(
    config_path: Path | None = typer.Option(None, "--config", help="YAML harness config"),
    p: int | None = P_OPTION,
    theta: str | None = typer.Option(None, "--theta", help="Density exponent as num/den"),
    epsilon: str | None = typer.Option(None, "--epsilon", help="Slack over alpha0, num/den"),
    seed: int | None = typer.Option(None, "--seed"),
    pipeline: str | None = typer.Option(None, "--pipeline", help="s6 or s7"),
    slab_width_override: int | None = typer.Option(None, "--slab-width", help="Override ceil(p^alpha)"),
    z1: int | None = typer.Option(None, "--z1", help="Base height (default min Z)"),
    model: str | None = typer.Option(None, "--model", help="Codomain model id"),
    threads: int = THREADS_OPTION,
    json_path: str | None = JSON_OPTION,
) -> None:
    """Replay a proof pipeline at a concrete prime.

    Exits 1 only on internal-consistency violations; failing asymptotic
    inequalities are reported as data.
    """
    flags = {
        "p": p,
        "theta": theta,
        "epsilon": epsilon,
        "seed": seed,
        "pipeline": pipeline,
        "slabWidth": slab_width_override,
        "z1": z1,
        "model": model,
    }
    overrides = {k: v for k, v in flags.items() if v is not None}
    with _usage_errors():
        if config_path is not None:
            config = HarnessConfig.load(config_path, overrides)
        else:
            config = HarnessConfig.from_dict(overrides)
        config.budgets = config.budgets.with_environment()
        config.budgets.threads = max(config.budgets.threads, threads)
        report = run_harness(config)
    _emit("harness", report, json_path, config=config.echo())
    if json_path is None:
        typer.echo(f"verdict: {report.verdict}")
    if report.verdict == "inconsistent":
        for failure in report.consistency_failures:
            typer.echo(f"Inconsistent: {failure}", err=True)
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def freiman(
    map_path: Path = typer.Argument(..., help="Map file ('s=<s> p=<p>' then 'x y z -> image' rows)"),
    s: int | None = typer.Option(None, "--s", help="Word length (default from the map file)"),
    codomain_path: Path | None = typer.Option(None, "--codomain", help="Table file of the codomain group"),
    isomorphism: bool = typer.Option(False, "--isomorphism", help="Also check injectivity and the inverse"),
    budget: int | None = typer.Option(None, "--budget", help="Signed-word budget"),
    threads: int = THREADS_OPTION,
    json_path: str | None = JSON_OPTION,
) -> None:
    """Decide whether a map is a Freiman s-homomorphism (or s-isomorphism)."""
    with _usage_errors():
        codomain = read_table_file(codomain_path) if codomain_path is not None else None
        pi, file_s = read_map_file(map_path, codomain=codomain)
        s = s or file_s
        words = budget or Budgets().with_environment().words
        check = check_freiman_isomorphism if isomorphism else check_freiman_homomorphism
        verdict = check(pi, s, budget=words, threads=threads)
    _emit("freiman", verdict, json_path, config={"map": str(map_path), "s": s, "budget": words})
    ok = verdict.is_isomorphism if isomorphism else verdict.is_homomorphism
    if not ok:
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def fibers(
    set_path: Path | None = SET_OPTION,
    p: int | None = P_OPTION,
    m: int | None = M_OPTION,
    alpha: str | None = ALPHA_OPTION,
    theta: str | None = THETA_SAMPLE_OPTION,
    seed: int = SEED_OPTION,
    json_path: str | None = JSON_OPTION,
) -> None:
    """The three largest coordinate fibers of A."""
    with _usage_errors():
        A, echo = _load_set(set_path, p, m, _rational(alpha, None, None, "alpha"), theta, seed)
        result = extract_fibers(A)
    payload = {**result.summary(), "X": list(result.X), "Y": list(result.Y), "Z": list(result.Z)}
    _emit("fibers", payload, json_path, config=echo)


@app.command()
def exceptions(
    set_path: Path | None = SET_OPTION,
    p: int | None = P_OPTION,
    m: int | None = M_OPTION,
    alpha: str | None = ALPHA_OPTION,
    theta: str | None = THETA_SAMPLE_OPTION,
    seed: int = SEED_OPTION,
    csv_path: Path | None = typer.Option(None, "--csv", help="Write the r-table as CSV"),
    n_csv_path: Path | None = typer.Option(None, "--n-csv", help="Write the N-table as CSV"),
    json_path: str | None = JSON_OPTION,
) -> None:
    """The exception set E of the r-table on the fibers of A."""
    with _usage_errors():
        A, echo = _load_set(set_path, p, m, _rational(alpha, None, None, "alpha"), theta, seed)
        f = extract_fibers(A)
        table = rep_counts_r(f.X, f.Y, f.Z, f.x0, f.y0, f.p)
        report = exception_set(table)
    sidecars = []
    if csv_path is not None:
        table.to_csv(csv_path)
        sidecars.append(str(csv_path))
    if n_csv_path is not None:
        rep_counts_N(f.X, f.Y, f.Z, f.x0, f.y0, f.p).to_csv(n_csv_path)
        sidecars.append(str(n_csv_path))
    payload = {**exception_report_json(report), "e_minus_e": report.e_minus_e, "energy": report.energy}
    _emit("exceptions", payload, json_path, config=echo, sidecars=sidecars)
    if not report.chain_consistent:
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def expsum(
    p: int = typer.Option(..., "--p", help="Prime"),
    x: str = typer.Option(..., "--x", help="X as comma-separated residues"),
    y: str = typer.Option(..., "--y", help="Y as comma-separated residues"),
    z: str | None = typer.Option(None, "--z", help="Z for the Parseval check"),
    json_path: str | None = JSON_OPTION,
) -> None:
    """Vinogradov's bound for S(h) and Parseval's identity for T(h)."""
    with _usage_errors():
        vinogradov = verify_vinogradov(_int_list(x, "x"), _int_list(y, "y"), p)
        parseval = verify_parseval(_int_list(z, "z"), p) if z is not None else None
    payload = {"vinogradov": _payload(vinogradov), "parseval": parseval and _payload(parseval)}
    _emit("expsum", payload, json_path, config={"p": p})
    if not vinogradov.holds or (parseval is not None and not parseval.exact_holds):
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def incidence(
    instance_path: Path | None = typer.Argument(None, help="Instance file ('d=<d> p=<p>', P and H sections)"),
    full_grid: bool = typer.Option(False, "--full-grid", help="All points and all hyperplanes of F_p^d"),
    d: int = typer.Option(2, "--d", help="Dimension for --full-grid"),
    p: int | None = P_OPTION,
    x: str | None = typer.Option(None, "--x", help="Energy instance: X residues"),
    y: str | None = typer.Option(None, "--y", help="Energy instance: Y residues"),
    z: str | None = typer.Option(None, "--z", help="Energy instance: Z residues"),
    c: str = typer.Option("2", "--c", help="Constant of the mixing bound, num/den"),
    threads: int = THREADS_OPTION,
    json_path: str | None = JSON_OPTION,
) -> None:
    """Count point-hyperplane incidences and check the mixing bound."""
    energy = None
    with _usage_errors():
        if instance_path is not None:
            P, H = read_instance_file(instance_path)
        elif full_grid:
            if p is None:
                raise ValueError("--full-grid needs --p")
            P, H = PointSet.full(d, p), HyperplaneSet.all_hyperplanes(d, p)
        elif p is not None and x and y and z:
            P, H = energy_to_incidence(_int_list(x, "x"), _int_list(y, "y"), _int_list(z, "z"), p)
            energy = count_incidences(P, H, with_multiplicity=True, threads=threads)
        else:
            raise ValueError("Give an instance file, --full-grid, or --p with --x/--y/--z")
        report = verify_vinh(P, H, parse_rational(c), threads=threads)
    payload = report.model_dump(mode="json")
    if energy is not None:
        payload["incidences_with_multiplicity"] = energy
    _emit("incidence", payload, json_path, config={"c": c})
    if not report.holds:
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def audit(
    map_path: Path | None = typer.Option(None, "--map", help="Map file to audit"),
    codomain_path: Path | None = typer.Option(None, "--codomain", help="Table file of the map's codomain"),
    model: str | None = typer.Option(None, "--model", help="Registered model id, built on the set"),
    set_path: Path | None = SET_OPTION,
    p: int | None = P_OPTION,
    m: int | None = M_OPTION,
    anchor: str | None = typer.Option(None, "--anchor", help="u,v,z1,z (default: the Z fiber, z1 < z its two smallest heights)"),
    s: int | None = typer.Option(None, "--s", help="Word length to audit at (default: the map file's s, else 6)"),
    seed: int = SEED_OPTION,
    threads: int = THREADS_OPTION,
    json_path: str | None = JSON_OPTION,
) -> None:
    """Audit a candidate Freiman s-model of A."""
    with _usage_errors():
        if (map_path is None) == (model is None):
            raise ValueError("Give exactly one of --map and --model")
        if map_path is not None:
            codomain = read_table_file(codomain_path) if codomain_path is not None else None
            pi, file_s = read_map_file(map_path, codomain=codomain)
            s = s or file_s
            echo = {"map": str(map_path)}
        else:
            A, echo = _load_set(set_path, p, m, None, None, seed)
            pi = ModelRegistry.build(model, A)
            echo["model"] = model
        if anchor is not None:
            u, v, z1, z = _int_list(anchor, "anchor")
            chosen = FiberAnchor(u, v, z1, z)
        else:
            f = extract_fibers(pi.domain)
            if len(f.Z) < 2:
                raise ValueError("The Z fiber has one element; give --anchor")
            chosen = FiberAnchor(f.u, f.v, f.Z[0], f.Z[1])
        budgets = Budgets(threads=threads).with_environment()
        try:
            report = model_audit(pi, chosen, s=s or MIN_AUDIT_S, budgets=budgets, seed=seed)
        except NotFreimanHomomorphismError as e:
            _emit("audit", {"error": str(e), "verdict": _payload(e.verdict)}, json_path, config=echo)
            raise typer.Exit(EXIT_FAILURE) from e
    _emit("audit", report, json_path, config=echo)
    if report.abelian_contradiction:
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def constants(
    theta: str = typer.Option(..., "--theta", help="num/den"),
    epsilon: str = typer.Option("1/100", "--epsilon", help="num/den"),
    s: int = typer.Option(6, "--s", help="Freiman order for f(s, K)"),
    k: str = typer.Option("2", "--K", help="Doubling constant for f(s, K), num/den"),
    json_path: str | None = JSON_OPTION,
) -> None:
    """Exact exponents and thresholds at theta."""
    with _usage_errors():
        report = compute_constants(parse_rational(theta), parse_rational(epsilon), s, parse_rational(k))
    _emit("constants", report, json_path, config={"theta": theta, "epsilon": epsilon, "s": s, "K": k})


@app.command()
def step2(
    p: int = typer.Option(..., "--p", help="Prime"),
    e: str = typer.Option("", "--e", help="Exception set E, comma-separated"),
    z: str = typer.Option(..., "--z", help="Fiber Z, comma-separated"),
    z1: int | None = typer.Option(None, "--z1", help="Base height (default min Z)"),
    json_path: str | None = JSON_OPTION,
) -> None:
    """Search the progression witness z' = z1 + t(z - z1) avoiding E - E."""
    with _usage_errors():
        require_prime_modulus(p)
        report = run_step2(_int_list(e, "e"), _int_list(z, "z"), p, z1)
    _emit("step2", report, json_path, config={"p": p, "z1": z1})
    if report.witness is None or report.witness_violations:
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def models() -> None:
    """List the registered codomain models."""
    import heisenberg_freiman.models  # noqa: F401

    for entry in ModelRegistry.get_all_models():
        typer.echo(f"{entry['id']}: {entry['description']}")


if __name__ == "__main__":
    app()
