"""Word error rate evaluation.

Hypotheses and references are compared after language-tag stripping
(`word_fy` -> `word`).  Errors are counted by Levenshtein alignment; among
minimum-error alignments the one with fewest substitutions, then fewest
deletions, is reported.  Per-condition results pool counts over utterances
(word-weighted), they are not averages of per-utterance rates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .errors import DataFormatError, UsageError

DEFAULT_TAG_CODES = ("fy", "nl")
TAG_DELIM = "_"
ALL_CONDITION = "all"


def strip_language_tags(
    words, codes: tuple[str, ...] = DEFAULT_TAG_CODES
) -> tuple[str, ...]:
    """Remove a trailing `_code` language marker from each word; words
    without a marker (or already stripped) pass through unchanged."""
    out = []
    for w in words:
        for c in codes:
            suffix = TAG_DELIM + c
            if w.endswith(suffix) and len(w) > len(suffix):
                w = w[: -len(suffix)]
                break
        out.append(w)
    return tuple(out)


@dataclass
class WerCounts:
    num_ref: int = 0
    subs: int = 0
    dels: int = 0
    ins: int = 0

    @property
    def errors(self) -> int:
        return self.subs + self.dels + self.ins

    @property
    def wer(self) -> float:
        if self.num_ref == 0:
            return 0.0 if self.errors == 0 else math.inf
        return self.errors / self.num_ref

    def add(self, other: "WerCounts") -> None:
        self.num_ref += other.num_ref
        self.subs += other.subs
        self.dels += other.dels
        self.ins += other.ins


def wer(ref, hyp) -> WerCounts:
    """Alignment counts for one utterance; ties on total errors prefer fewer
    substitutions, then fewer deletions."""
    ref = list(ref)
    hyp = list(hyp)
    R, H = len(ref), len(hyp)
    # D[i][j] = (errors, subs, dels) aligning ref[:i] with hyp[:j]
    D = [[None] * (H + 1) for _ in range(R + 1)]
    D[0][0] = (0, 0, 0)
    for i in range(1, R + 1):
        D[i][0] = (i, 0, i)
    for j in range(1, H + 1):
        D[0][j] = (j, 0, 0)
    for i in range(1, R + 1):
        for j in range(1, H + 1):
            e, s, d = D[i - 1][j - 1]
            if ref[i - 1] == hyp[j - 1]:
                best = (e, s, d)
            else:
                best = (e + 1, s + 1, d)
            e, s, d = D[i - 1][j]
            best = min(best, (e + 1, s, d + 1))
            e, s, d = D[i][j - 1]
            best = min(best, (e + 1, s, d))
            D[i][j] = best
    e, s, d = D[R][H]
    return WerCounts(num_ref=R, subs=s, dels=d, ins=e - s - d)


# -- per-condition reports -------------------------------------------------


@dataclass
class WerReport:
    by_condition: dict[str, WerCounts]
    missing_utts: list[str] = field(default_factory=list)

    def condition(self, name: str) -> WerCounts:
        return self.by_condition[name]


def report_by_condition(
    refs: dict[str, tuple[str, tuple[str, ...]]],
    hyps: dict[str, tuple[str, ...]],
    tag_codes: tuple[str, ...] = DEFAULT_TAG_CODES,
) -> WerReport:
    """refs: utt_id -> (condition, ref words); hyps: utt_id -> hyp words.

    A missing hypothesis scores as all deletions and is listed in
    missing_utts.  Hypotheses for unknown utterances are an error."""
    unknown = sorted(set(hyps) - set(refs))
    if unknown:
        raise UsageError(f"hypotheses for unknown utterances: {unknown[:5]}")
    report = WerReport(by_condition={ALL_CONDITION: WerCounts()})
    for utt_id in sorted(refs):
        cond, ref_words = refs[utt_id]
        ref_clean = strip_language_tags(ref_words, tag_codes)
        if utt_id in hyps:
            hyp_clean = strip_language_tags(hyps[utt_id], tag_codes)
        else:
            hyp_clean = ()
            report.missing_utts.append(utt_id)
        counts = wer(ref_clean, hyp_clean)
        report.by_condition.setdefault(cond, WerCounts()).add(counts)
        report.by_condition[ALL_CONDITION].add(counts)
    return report


# -- reference / hypothesis files ------------------------------------------
#
# references:  utt_id condition word word ...
# hypotheses:  utt_id word word ...


def read_refs(path: str) -> dict[str, tuple[str, tuple[str, ...]]]:
    out: dict[str, tuple[str, tuple[str, ...]]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected `utt_id condition words...`")
            utt_id, cond, words = parts[0], parts[1], tuple(parts[2:])
            if utt_id in out:
                raise DataFormatError(f"{path}:{lineno}: duplicate utterance {utt_id!r}")
            out[utt_id] = (cond, words)
    return out


def write_refs(refs: dict[str, tuple[str, tuple[str, ...]]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for utt_id in sorted(refs):
            cond, words = refs[utt_id]
            f.write(f"{utt_id} {cond} {' '.join(words)}".rstrip() + "\n")


def read_hyps(path: str) -> dict[str, tuple[str, ...]]:
    out: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] in out:
                raise DataFormatError(f"{path}:{lineno}: duplicate utterance {parts[0]!r}")
            out[parts[0]] = tuple(parts[1:])
    return out


def write_hyps(hyps: dict[str, tuple[str, ...]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for utt_id in sorted(hyps):
            f.write(f"{utt_id} {' '.join(hyps[utt_id])}".rstrip() + "\n")


# -- report writers --------------------------------------------------------


def _ordered_conditions(report: WerReport) -> list[str]:
    conds = [c for c in sorted(report.by_condition) if c != ALL_CONDITION]
    return conds + [ALL_CONDITION]


def write_report_csv(report: WerReport, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["condition", "num_ref_words", "sub", "del", "ins", "wer"])
        for cond in _ordered_conditions(report):
            c = report.by_condition[cond]
            w.writerow([cond, c.num_ref, c.subs, c.dels, c.ins, f"{c.wer:.4f}"])


def format_report_text(report: WerReport) -> str:
    lines = [f"{'condition':<10} {'#words':>7} {'sub':>5} {'del':>5} {'ins':>5} {'wer%':>7}"]
    for cond in _ordered_conditions(report):
        c = report.by_condition[cond]
        lines.append(
            f"{cond:<10} {c.num_ref:>7} {c.subs:>5} {c.dels:>5} {c.ins:>5} "
            f"{100.0 * c.wer:>7.2f}"
        )
    if report.missing_utts:
        lines.append(f"missing hypotheses ({len(report.missing_utts)}): "
                     + " ".join(report.missing_utts[:10]))
    return "\n".join(lines) + "\n"


def write_report_text(report: WerReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_report_text(report))


def write_report_figure(report: WerReport, path: str, title: str = "WER by condition") -> None:
    """Bar chart of per-condition WER, rendered to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    conds = _ordered_conditions(report)
    values = [100.0 * report.by_condition[c].wer for c in conds]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(conds, values, color="#4878a8")
    ax.set_ylabel("WER (%)")
    ax.set_title(title)
    for i, v in enumerate(values):
        if math.isfinite(v):
            ax.text(i, v, f"{v:.1f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
