"""Rescoring of N-best hypothesis lists with per-graph language models.

Each hypothesis keeps its acoustic cost; its LM cost is replaced by an
interpolation between the cost accumulated in the decoding graph and the
cost assigned by the rescoring model chosen via the hypothesis' graph id:

    new_lm = mu * graph_lm_cost + (1 - mu) * lm_scale * model_cost
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .decoder import Hypothesis
from .errors import DataFormatError, UsageError
from .lm import NGramModel


@dataclass
class RescoreConfig:
    models: dict[str | None, NGramModel]
    lm_scale: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise UsageError(f"mu must be in [0,1], got {self.mu}")
        if self.lm_scale <= 0:
            raise UsageError("lm_scale must be positive")


@dataclass
class RescoredHypothesis:
    words: tuple[str, ...]
    graph_id: str | None
    am_cost: float
    lm_cost: float

    @property
    def total_cost(self) -> float:
        return self.am_cost + self.lm_cost


def rescore_nbest(
    hyps: list[Hypothesis], config: RescoreConfig
) -> list[RescoredHypothesis]:
    """Re-rank hypotheses by am + interpolated LM cost (stable sort)."""
    out = []
    for h in hyps:
        model = config.models.get(h.graph_id)
        if model is None:
            raise UsageError(f"no rescoring model for graph id {h.graph_id!r}")
        model_cost = model.sentence_cost(list(h.words))
        new_lm = config.mu * h.graph_lm_cost + (1.0 - config.mu) * config.lm_scale * model_cost
        out.append(RescoredHypothesis(h.words, h.graph_id, h.am_cost, new_lm))
    out.sort(key=lambda r: r.total_cost)
    return out


# -- N-best file format ----------------------------------------------------
#
# one hypothesis per line:
#   utt_id rank graph_id am_cost lm_cost word word ...
# graph_id "-" means untagged; rank is 1-based within the utterance.


def write_nbest(nbest: dict[str, list], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for utt_id in sorted(nbest):
            for rank, h in enumerate(nbest[utt_id], 1):
                gid = h.graph_id if h.graph_id is not None else "-"
                lm = h.graph_lm_cost if isinstance(h, Hypothesis) else h.lm_cost
                f.write(
                    f"{utt_id} {rank} {gid} {float(h.am_cost)!r} {float(lm)!r} "
                    f"{' '.join(h.words)}\n".rstrip() + "\n"
                )


def read_nbest(path: str) -> dict[str, list[Hypothesis]]:
    out: dict[str, list[Hypothesis]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 5:
                raise DataFormatError(f"{path}:{lineno}: expected at least 5 fields")
            utt_id, rank_s, gid = parts[0], parts[1], parts[2]
            try:
                rank = int(rank_s)
                am = float(parts[3])
                lm = float(parts[4])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric cost field") from None
            hyps = out.setdefault(utt_id, [])
            if rank != len(hyps) + 1:
                raise DataFormatError(
                    f"{path}:{lineno}: rank {rank} out of order for {utt_id!r}"
                )
            graph_id = None if gid == "-" else gid
            hyps.append(Hypothesis(tuple(parts[5:]), graph_id, am, lm))
    return out
