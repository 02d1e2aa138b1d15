"""``esrsim`` command line: exchange, dist, audit, verify, bench.

Exit codes: 0 ok, 1 verification failed / unsuccessful exchange,
2 usage, 3 resource limit, 4 malformed input.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import analytic, protocol
from . import statevector as sv
from .audit import ROLE_FIELDS, KnowledgeView, posterior, verify_transcript
from .bitvec import BitVector
from .errors import InvalidN, MalformedTranscript, QubitLimitExceeded

EXIT_FAILED = 1
EXIT_RESOURCE = 3
EXIT_MALFORMED = 4


class ResourceError(click.ClickException):
    exit_code = EXIT_RESOURCE


class MalformedInput(click.ClickException):
    exit_code = EXIT_MALFORMED


def _bitstring(ctx, param, value):
    if value is None:
        return None
    value = value.strip()
    if any(ch not in "01" for ch in value):
        raise click.BadParameter(f"{value!r} is not a bitstring over {{0,1}}")
    return value


def _read_secret(text: str | None, path: str | None, flag: str) -> str:
    if path is None:
        return text or ""
    if text:
        raise click.UsageError(f"give either {flag} or {flag}-file, not both")
    content = Path(path).read_text(encoding="utf-8").strip()
    if any(ch not in "01" for ch in content):
        raise click.BadParameter(f"file {path} does not hold a bitstring", param_hint=f"{flag}-file")
    return content


def _load_documents(path: str) -> list[dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedInput(f"{path}: not a JSON document ({exc})") from None
    docs = doc if isinstance(doc, list) else [doc]
    if not docs:
        raise MalformedInput(f"{path}: empty transcript array")
    return docs


def _pick(docs: list[dict], shot: int, path: str) -> protocol.Transcript:
    if not 0 <= shot < len(docs):
        raise click.BadParameter(f"{path} holds {len(docs)} transcript(s)", param_hint="--shot")
    try:
        return protocol.Transcript.from_dict(docs[shot])
    except MalformedTranscript as exc:
        raise MalformedInput(f"{path}: {exc}") from None


@click.group()
def main() -> None:
    """Simulate and audit the entanglement-based reciprocal exchange protocol."""


@main.command()
@click.option("--ib", default="", callback=_bitstring, help="Bob's secret, msb first.")
@click.option("--ic", default="", callback=_bitstring, help="Charlie's secret, msb first.")
@click.option("--ib-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--ic-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--backend", type=click.Choice(protocol.BACKENDS), default="analytic", show_default=True)
@click.option("--variant", type=click.Choice(protocol.VARIANTS), default="ghz3", show_default=True)
@click.option("--shots", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None,
              help="Transcript file; stdout when omitted.")
@click.option("--redact", is_flag=True, help="Omit secrets and private register contents.")
def exchange(ib, ic, ib_file, ic_file, seed, backend, variant, shots, out, redact):
    """Run the protocol and write transcripts."""
    ib = _read_secret(ib, ib_file, "--ib")
    ic = _read_secret(ic, ic_file, "--ic")
    if not ib and not ic:
        raise click.BadParameter("at least one secret must be non-empty", param_hint="--ib/--ic")
    config = protocol.ExchangeConfig(ib, ic, backend=backend, variant=variant,
                                     master_seed=seed, redact_private=redact)
    try:
        sv.check_qubit_budget(config.required_qubits())
        transcripts = protocol.run_shots(config, shots)
    except QubitLimitExceeded as exc:
        raise ResourceError(f"--backend {backend} with n={config.n}: {exc}") from None

    docs = [t.to_dict() for t in transcripts]
    text = json.dumps(docs[0] if shots == 1 else docs, indent=2) + "\n"
    successes = sum(t.success for t in transcripts)
    summary = f"n={config.n} shots={shots} success={successes}"
    if out is None:
        click.echo(text, nl=False)
        click.echo(summary, err=True)
    else:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(summary)
    if successes != shots:
        sys.exit(EXIT_FAILED)


@main.command()
@click.option("--i", "i_str", required=True, callback=_bitstring, help="Aggregated vector i_B i_C.")
@click.option("--backend", type=click.Choice(["statevector", "analytic"]), default="analytic",
              show_default=True)
@click.option("--variant", type=click.Choice(protocol.VARIANTS), default="ghz3", show_default=True)
@click.option("--fidelity", type=click.Choice(["full", "reduced"]), default="full", show_default=True,
              help="Statevector model: with or without the output qubits.")
def dist(i_str, backend, variant, fidelity):
    """Print the exact joint outcome table."""
    n = len(i_str)
    if not 1 <= n <= analytic.MAX_EXACT_N:
        raise click.BadParameter(f"length must be in 1..{analytic.MAX_EXACT_N}, got {n}",
                                 param_hint="--i")
    registers = ("a", "b", "c") if variant == "ghz3" else ("b", "c")
    if backend == "analytic":
        if variant == "ghz3":
            table = analytic.exact_distribution(i_str)
        else:
            table = analytic.exact_distribution_epr(i_str)
        rows = {k: float(p) for k, p in table.items()}
    else:
        blocks = ("AIR", "BIR", "CIR") if variant == "ghz3" else ("BIR", "CIR")
        try:
            psi3 = protocol.circuit_phases(i_str, "", variant, fidelity)[3]
        except QubitLimitExceeded as exc:
            raise ResourceError(f"--i of length {n}: {exc}") from None
        rows = sv.joint_marginal(psi3, blocks)
    width = max(n, 1)
    click.echo("  ".join(r.ljust(width) for r in registers) + "  probability")
    for key in sorted(rows):
        click.echo("  ".join(k.ljust(width) for k in key) + f"  {rows[key]:.12f}")


@main.command()
@click.argument("transcript", type=click.Path(exists=True, dir_okay=False))
@click.option("--view", type=click.Choice(sorted(ROLE_FIELDS)), required=True)
@click.option("--leak", multiple=True,
              help="Extra field known to the view, e.g. b_C or b_C[0]; repeatable.")
@click.option("--shot", type=int, default=0, show_default=True,
              help="Index into a transcript array.")
@click.option("--json", "as_json", is_flag=True, help="Emit the posterior as JSON.")
def audit(transcript, view, leak, shot, as_json):
    """Exact posterior over the secrets from one party's point of view."""
    t = _pick(_load_documents(transcript), shot, transcript)
    try:
        kview = KnowledgeView.for_role(view, leak, variant=t.variant)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--view") from None
    try:
        table = posterior(kview, t)
    except MalformedTranscript as exc:
        raise MalformedInput(f"{transcript}: {exc}") from None
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--leak") from None
    if as_json:
        click.echo(json.dumps(table.to_dict(), indent=2))
        return
    wb, wc = max(t.len_ib, 3), max(t.len_ic, 3)
    click.echo(f"{'i_B'.ljust(wb)}  {'i_C'.ljust(wc)}  {'count':>8}  probability")
    for (b, c), count in table.counts.items():
        if not count:
            continue
        click.echo(f"{b.ljust(wb)}  {c.ljust(wc)}  {count:>8}  {table.probability(b, c)}")
    click.echo(f"view={view} candidates={len(table.support())} verdict={table.verdict()}")


@main.command()
@click.argument("transcript", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit the report(s) as JSON.")
def verify(transcript, as_json):
    """Check a transcript's internal consistency."""
    docs = _load_documents(transcript)
    reports = []
    for k, doc in enumerate(docs):
        if not isinstance(doc, dict):
            raise MalformedInput(f"{transcript}: entry {k} is not an object")
        try:
            reports.append(verify_transcript(doc))
        except MalformedTranscript as exc:
            raise MalformedInput(f"{transcript}: entry {k}: {exc}") from None
    if as_json:
        payload = [r.to_dict() for r in reports]
        click.echo(json.dumps(payload[0] if len(payload) == 1 else payload, indent=2))
    else:
        for k, report in enumerate(reports):
            prefix = f"[{k}] " if len(reports) > 1 else ""
            for check in report.checks:
                detail = f"  {check.detail}" if check.detail else ""
                click.echo(f"{prefix}{check.name:<28}{check.status}{detail}")
        ok = all(r.passed for r in reports)
        failed = sorted({c.name for r in reports for c in r.failed()})
        click.echo(f"verdict={'PASS' if ok else 'FAIL'}" + (f" failed={','.join(failed)}" if failed else ""))
    if not all(r.passed for r in reports):
        sys.exit(EXIT_FAILED)


@main.command()
@click.option("--n-max", type=click.IntRange(min=1), required=True)
@click.option("--shots", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--variant", type=click.Choice(protocol.VARIANTS), default="ghz3", show_default=True)
def bench(n_max, shots, seed, variant):
    """Time each backend for n = 1 .. --n-max."""
    cap = sv.qubit_cap()
    click.echo(f"{'n':>3}  {'backend':<9}{'qubits':>7}  {'state_bytes':>14}  {'seconds':>10}")
    for n in range(1, n_max + 1):
        secret = BitVector(0, n)
        for backend in protocol.BACKENDS:
            config = protocol.ExchangeConfig(secret, "", backend=backend, variant=variant,
                                             master_seed=seed)
            qubits = config.required_qubits()
            mem = 16 << qubits if qubits else 0
            if qubits > cap:
                click.echo(f"{n:>3}  {backend:<9}{qubits:>7}  {mem:>14}  {'over-cap':>10}")
                continue
            protocol.clear_state_cache()
            start = time.perf_counter()
            try:
                protocol.run_shots(config, shots)
            except (QubitLimitExceeded, InvalidN) as exc:
                raise ResourceError(str(exc)) from None
            elapsed = time.perf_counter() - start
            click.echo(f"{n:>3}  {backend:<9}{qubits:>7}  {mem:>14}  {elapsed:>10.4f}")


if __name__ == "__main__":
    main()
