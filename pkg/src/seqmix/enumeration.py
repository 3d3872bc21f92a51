"""Exhaustive level-by-level expansion of ``X^n`` for one or more measures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from seqmix.errors import CapacityError, InputError
from seqmix.measures import ProcessMeasure, log2p, take_state

DEFAULT_CAP = 2**22


@dataclass(frozen=True)
class Enumeration:
    """Sequences of one length with the log2 probability each measure gives them.

    Rows are in lexicographic (radix-A, first symbol most significant) order.
    """

    A: int
    n: int
    seqs: np.ndarray  # (m, n)
    logp: np.ndarray  # (K, m)

    @property
    def codes(self) -> np.ndarray:
        if self.n * np.log2(self.A) >= 62:
            raise InputError("integer codes only available while A^n < 2^62")
        powers = self.A ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return self.seqs.astype(np.int64) @ powers


def enumerate_sequences(
    measures: Sequence[ProcessMeasure],
    n: int,
    cap: int = DEFAULT_CAP,
    prune_on: int | None = None,
) -> Enumeration:
    """Expand all length-``n`` sequences, optionally dropping subtrees null under one measure.

    ``prune_on`` indexes the measure whose zero-probability prefixes are discarded,
    so a Dirac measure costs one path whatever ``n`` is. ``cap`` bounds the frontier.
    """
    if not measures:
        raise InputError("need at least one measure")
    A = measures[0].A
    if any(mu.A != A for mu in measures):
        raise InputError("measures must share one alphabet")
    if n < 0:
        raise InputError(f"horizon must be non-negative, got {n}")
    K = len(measures)
    seqs = np.zeros((1, 0), dtype=np.int64)
    logp = np.zeros((K, 1))
    states = [mu.init_state(1) for mu in measures]
    for _ in range(n):
        m = seqs.shape[0]
        if m * A > cap:
            raise CapacityError(f"exhaustive expansion would visit {m * A} sequences", cap)
        preds = np.stack([mu.predict(s) for mu, s in zip(measures, states)])  # (K, m, A)
        parent = np.repeat(np.arange(m), A)
        sym = np.tile(np.arange(A), m)
        new_logp = logp[:, parent] + log2p(preds[:, parent, sym])
        if prune_on is not None:
            keep = np.isfinite(new_logp[prune_on])
            parent, sym, new_logp = parent[keep], sym[keep], new_logp[:, keep]
        states = [mu.update(take_state(s, parent), sym) for mu, s in zip(measures, states)]
        seqs = np.hstack([seqs[parent], sym[:, None]])
        logp = new_logp
    return Enumeration(A=A, n=n, seqs=seqs, logp=logp)
