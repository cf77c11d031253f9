"""Counting-statistics emulation of the protocol.

Converts branch states and measurement settings into exact outcome
probabilities, draws Poissonian coincidence counts per setting, estimates
the correlators and certificates from counts, and propagates statistical
errors by repeating the sampling.

Randomness contract: all sampling uses numpy's seeded PCG64 generator
(``numpy.random.default_rng``).  The bootstrap derives one generator per
trial from the master seed via ``SeedSequence(seed, spawn_key=(trial,))``
and consumes it over the settings in listing order, four Poisson draws per
setting, so reports are reproducible and independent of any parallel
scheduling of trials.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bell import BellCertificate, Correlators, certificate_from_correlators, observables
from .errors import CountTableError, DomainError, InsufficientDataError
from .protocol import History, ProtocolConfig, _evolve_levels, _kraus_matrices
from .qcore import IDENTITY, SIGMA_Z, tensor

#: cell order of every 4-vector of counts/probabilities: Alice then Bob sign
OUTCOME_PAIRS = ((+1, +1), (+1, -1), (-1, +1), (-1, -1))

COUNT_COLUMNS = ("step", "history", "alice_setting", "bob_setting",
                 "n_pp", "n_pm", "n_mp", "n_mm")

CLAMP_FLAG_FRACTION = 0.01


def history_to_str(history: History) -> str:
    return "".join("+" if y > 0 else "-" for y in history)


def history_from_str(text: str) -> History:
    out = []
    for ch in text:
        if ch == "+":
            out.append(+1)
        elif ch == "-":
            out.append(-1)
        else:
            raise DomainError(f"history strings use only '+' and '-', got {text!r}")
    return tuple(out)


@dataclass(frozen=True)
class SettingSpec:
    """One measured setting: step, conditioning history, bases and exposure."""

    step: int
    history: History
    alice_setting: int
    bob_setting: int
    mean_total_counts: float

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(int(y) for y in self.history))
        if self.step < 1:
            raise DomainError(f"step must be >= 1, got {self.step}")
        if len(self.history) != self.step - 1:
            raise DomainError(
                f"history length {len(self.history)} does not match step {self.step}"
            )
        if any(y not in (+1, -1) for y in self.history):
            raise DomainError("history entries must be +1 or -1")
        if self.alice_setting not in (0, 1) or self.bob_setting not in (0, 1):
            raise DomainError("alice_setting and bob_setting must be 0 or 1")
        if not self.mean_total_counts > 0:
            raise DomainError("mean_total_counts must be positive")

    def key(self) -> tuple[int, History]:
        return (self.step, self.history)


@dataclass(frozen=True)
class CountRow:
    spec: SettingSpec
    counts: tuple[int, int, int, int]

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        if len(counts) != 4 or any(n < 0 for n in counts):
            raise DomainError(f"counts must be four non-negative integers, got {self.counts}")
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class CountTable:
    """Coincidence counts, one row per setting; settings must not repeat."""

    rows: tuple[CountRow, ...]

    def __post_init__(self):
        rows = tuple(self.rows)
        seen = set()
        for row in rows:
            ident = (row.spec.step, row.spec.history,
                     row.spec.alice_setting, row.spec.bob_setting)
            if ident in seen:
                raise CountTableError(f"duplicate setting {ident} in count table")
            seen.add(ident)
        object.__setattr__(self, "rows", rows)


@dataclass(frozen=True)
class EstimateEntry:
    """Certificate and error bars for one (step, history) pair.

    ``certificate`` is assembled from the (trial-averaged) correlators;
    ``h_min_mean`` is the average of the per-trial min-entropies, which sits
    below the certificate value near the quantum bound because overshooting
    trials clamp.  ``flagged`` marks entries where more than 1% of trials
    clamped.
    """

    step: int
    history: History
    certificate: BellCertificate
    i_value_std: float | None = None
    h_min_mean: float | None = None
    h_min_std: float | None = None
    clamp_fraction: float = 0.0
    flagged: bool = False


@dataclass(frozen=True)
class EstimateReport:
    entries: tuple[EstimateEntry, ...]
    trials: int


def default_specs(config: ProtocolConfig, mean_total_counts: float) -> list[SettingSpec]:
    """Every (step, history, alice, bob) setting of the configured protocol,
    in tree order, with equal exposure."""
    specs: list[SettingSpec] = []
    histories: list[History] = [()]
    for step in range(1, config.n_steps + 1):
        for history in histories:
            for a in (0, 1):
                for b in (0, 1):
                    specs.append(SettingSpec(step, history, a, b, mean_total_counts))
        histories = [h + (y,) for h in histories for y in (+1, -1)]
    return specs


def outcome_probabilities(config: ProtocolConfig, spec: SettingSpec) -> np.ndarray:
    """Joint Born-rule distribution of (Alice outcome, Bob outcome).

    Alice measures her projective setting at the step's ideal angle; Bob
    either measures sigma_z (setting 0) or applies the step's Kraus pair
    (setting 1).  Cell order follows :data:`OUTCOME_PAIRS`.
    """
    if spec.step > config.n_steps:
        raise DomainError(
            f"setting references step {spec.step} of a {config.n_steps}-step protocol"
        )
    levels = _evolve_levels(config, max_depth=spec.step - 1)
    nodes, theta = levels[spec.step - 1]
    by_history = {hist: rho for hist, _, rho in nodes}
    if spec.history not in by_history:
        raise DomainError(f"history {spec.history} is unreachable in this protocol")
    rho = by_history[spec.history]

    xi = float(config.strengths[spec.step - 1])
    a0, a1, _, _ = observables(theta, xi)
    alice_obs = (a0, a1)[spec.alice_setting].entries
    if spec.bob_setting == 0:
        bob_effects = {y: (IDENTITY + y * SIGMA_Z) / 2.0 for y in (+1, -1)}
    else:
        kp, km = _kraus_matrices(xi)
        bob_effects = {+1: kp.conj().T @ kp, -1: km.conj().T @ km}

    probs = np.empty(4, dtype=float)
    for cell, (a, y) in enumerate(OUTCOME_PAIRS):
        proj_a = (IDENTITY + a * alice_obs) / 2.0
        effect = tensor(proj_a, bob_effects[y])
        probs[cell] = float(np.real(np.trace(rho @ effect)))
    total = probs.sum()
    if abs(total - 1.0) > 1e-12:
        raise DomainError(f"outcome probabilities sum to {total}, expected 1")
    return np.clip(probs, 0.0, None)


def sample_counts(probs, mean_total_counts: float, seed) -> np.ndarray:
    """Independent Poisson counts per outcome cell, mean = exposure x prob.

    ``seed`` may be an integer or an already-constructed numpy Generator
    (the bootstrap passes per-trial generators).
    """
    probs = np.asarray(probs, dtype=float)
    if not mean_total_counts > 0:
        raise DomainError("mean_total_counts must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.poisson(mean_total_counts * probs)


def _group_rows(table: CountTable) -> dict[tuple[int, History], dict[tuple[int, int], CountRow]]:
    groups: dict[tuple[int, History], dict[tuple[int, int], CountRow]] = {}
    for row in table.rows:
        groups.setdefault(row.spec.key(), {})[
            (row.spec.alice_setting, row.spec.bob_setting)
        ] = row
    return groups


def _correlators_from_counts(settings: dict[tuple[int, int], CountRow],
                             key: tuple[int, History]) -> Correlators:
    needed = [(a, b) for a in (0, 1) for b in (0, 1)]
    missing = [ab for ab in needed if ab not in settings]
    if missing:
        raise CountTableError(
            f"(step {key[0]}, history '{history_to_str(key[1])}') is missing "
            f"settings {missing}"
        )

    def product_correlator(a: int, b: int) -> float:
        n = np.asarray(settings[(a, b)].counts, dtype=float)
        total = n.sum()
        if total <= 0:
            raise InsufficientDataError(
                f"no events for setting (step {key[0]}, "
                f"history '{history_to_str(key[1])}', alice {a}, bob {b})"
            )
        return float((n[0] + n[3] - n[1] - n[2]) / total)

    def bob_marginal(a: int) -> float:
        n = np.asarray(settings[(a, 0)].counts, dtype=float)
        return float((n[0] + n[2] - n[1] - n[3]) / n.sum())

    # product correlators need the totals checked first
    e00 = product_correlator(0, 0)
    e01 = product_correlator(0, 1)
    e10 = product_correlator(1, 0)
    e11 = product_correlator(1, 1)
    b0 = 0.5 * (bob_marginal(0) + bob_marginal(1))
    return Correlators(b0=b0, a0b0=e00, a0b1=e01, a1b0=e10, a1b1=e11)


def estimate(table: CountTable, config: ProtocolConfig) -> EstimateReport:
    """Point estimates: one certificate per (step, history) in the table.

    Correlators are count ratios; the weak-measurement attenuation is
    already present in the sampled statistics, so no extra factor applies.
    The ideal protocol angles supply each step's tilt coefficient.
    """
    thetas = config.ideal_thetas()
    entries = []
    for key, settings in sorted(_group_rows(table).items()):
        step, history = key
        if step > config.n_steps:
            raise CountTableError(
                f"count table references step {step} of a {config.n_steps}-step protocol"
            )
        corr = _correlators_from_counts(settings, key)
        cert = certificate_from_correlators(corr, thetas[step - 1])
        entries.append(
            EstimateEntry(
                step=step,
                history=history,
                certificate=cert,
                clamp_fraction=1.0 if cert.overshoot else 0.0,
            )
        )
    return EstimateReport(entries=tuple(entries), trials=1)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def bootstrap(
    config: ProtocolConfig,
    specs: list[SettingSpec],
    trials: int,
    seed: int,
) -> EstimateReport:
    """Repeat sample-and-estimate ``trials`` times around the model.

    Each trial draws fresh Poisson counts for every setting from the exact
    Born-rule probabilities, estimates all certificates, and the report
    carries the spread: sample standard deviations (ddof=1) for the Bell
    value and the min-entropy per (step, history).
    """
    if trials < 2:
        raise DomainError(f"trials must be >= 2, got {trials}")
    probs = [outcome_probabilities(config, spec) for spec in specs]
    collected: dict[tuple[int, History], dict[str, list[float]]] = {}
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        rows = [
            CountRow(spec, tuple(sample_counts(pr, spec.mean_total_counts, rng)))
            for spec, pr in zip(specs, probs)
        ]
        report = estimate(CountTable(tuple(rows)), config)
        for entry in report.entries:
            slot = collected.setdefault(
                (entry.step, entry.history),
                {"i": [], "h": [], "clamped": [], "b0": [], "a0b0": [], "a0b1": [],
                 "a1b0": [], "a1b1": []},
            )
            cert = entry.certificate
            slot["i"].append(cert.i_value)
            slot["h"].append(cert.h_min)
            slot["clamped"].append(1.0 if cert.overshoot else 0.0)
            for name in ("b0", "a0b0", "a0b1", "a1b0", "a1b1"):
                slot[name].append(getattr(cert.correlators, name))

    thetas = config.ideal_thetas()
    entries = []
    for key in sorted(collected):
        slot = collected[key]
        step, history = key
        mean_corr = Correlators(*(float(np.mean(slot[n]))
                                  for n in ("b0", "a0b0", "a0b1", "a1b0", "a1b1")))
        cert = certificate_from_correlators(mean_corr, thetas[step - 1])
        clamp_fraction = float(np.mean(slot["clamped"]))
        entries.append(
            EstimateEntry(
                step=step,
                history=history,
                certificate=cert,
                i_value_std=float(np.std(slot["i"], ddof=1)),
                h_min_mean=float(np.mean(slot["h"])),
                h_min_std=float(np.std(slot["h"], ddof=1)),
                clamp_fraction=clamp_fraction,
                flagged=clamp_fraction > CLAMP_FLAG_FRACTION,
            )
        )
    return EstimateReport(entries=tuple(entries), trials=trials)


def resample_counts(
    table: CountTable, config: ProtocolConfig, trials: int, seed: int
) -> EstimateReport:
    """Bootstrap around supplied counts instead of model predictions.

    Each trial redraws every cell from a Poisson law whose mean is the
    observed count; the returned certificate is the point estimate from the
    supplied table and the spreads come from the resampling.
    """
    if trials < 2:
        raise DomainError(f"trials must be >= 2, got {trials}")
    point = estimate(table, config)
    spread: dict[tuple[int, History], dict[str, list[float]]] = {}
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        rows = [
            CountRow(row.spec, tuple(rng.poisson(np.asarray(row.counts, dtype=float))))
            for row in table.rows
        ]
        report = estimate(CountTable(tuple(rows)), config)
        for entry in report.entries:
            slot = spread.setdefault((entry.step, entry.history),
                                     {"i": [], "h": [], "clamped": []})
            slot["i"].append(entry.certificate.i_value)
            slot["h"].append(entry.certificate.h_min)
            slot["clamped"].append(1.0 if entry.certificate.overshoot else 0.0)

    entries = []
    for entry in point.entries:
        slot = spread[(entry.step, entry.history)]
        clamp_fraction = float(np.mean(slot["clamped"]))
        entries.append(
            EstimateEntry(
                step=entry.step,
                history=entry.history,
                certificate=entry.certificate,
                i_value_std=float(np.std(slot["i"], ddof=1)),
                h_min_mean=float(np.mean(slot["h"])),
                h_min_std=float(np.std(slot["h"], ddof=1)),
                clamp_fraction=clamp_fraction,
                flagged=clamp_fraction > CLAMP_FLAG_FRACTION,
            )
        )
    return EstimateReport(entries=tuple(entries), trials=trials)


# ---------------------------------------------------------------------------
# count-table file format (shared with the CLI)
# ---------------------------------------------------------------------------


def write_count_table(path, table: CountTable) -> None:
    """Write the ASCII comma-separated count format with its header row."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(COUNT_COLUMNS)
        for row in table.rows:
            writer.writerow(
                (
                    row.spec.step,
                    history_to_str(row.spec.history),
                    row.spec.alice_setting,
                    row.spec.bob_setting,
                    *row.counts,
                )
            )


def read_count_table(path, mean_total_counts: float | None = None) -> CountTable:
    """Parse a count-table file; errors cite the offending line number.

    ``mean_total_counts`` backfills the exposure field of the parsed
    settings (the file stores counts only); it defaults to each row's own
    total so resampling reproduces the observed exposure.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise CountTableError(f"{path}: count tables must be ASCII ({exc})") from exc
    except OSError as exc:
        raise CountTableError(f"{path}: {exc}") from exc

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CountTableError(f"{path}: empty file, header row required") from None
    if tuple(h.strip() for h in header) != COUNT_COLUMNS:
        raise CountTableError(
            f"{path}: line 1: header must be {','.join(COUNT_COLUMNS)}"
        )

    rows: list[CountRow] = []
    for lineno, fields in enumerate(reader, start=2):
        if not fields:
            continue
        if len(fields) != len(COUNT_COLUMNS):
            raise CountTableError(
                f"{path}: line {lineno}: expected {len(COUNT_COLUMNS)} fields, "
                f"got {len(fields)}"
            )
        try:
            step = int(fields[0])
            history = history_from_str(fields[1].strip())
            alice = int(fields[2])
            bob = int(fields[3])
            counts = tuple(int(x) for x in fields[4:8])
            exposure = mean_total_counts if mean_total_counts else max(1.0, float(sum(counts)))
            spec = SettingSpec(step, history, alice, bob, exposure)
            rows.append(CountRow(spec, counts))
        except (ValueError, DomainError) as exc:
            raise CountTableError(f"{path}: line {lineno}: {exc}") from exc
    try:
        return CountTable(tuple(rows))
    except CountTableError as exc:
        raise CountTableError(f"{path}: {exc}") from exc
