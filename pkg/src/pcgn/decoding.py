"""Greedy and beam-search decoding.

Both decoders walk a step function ``(state, y_prev) -> (log_probs, state)``
so the search logic is independent of the network; :class:`DecodeSession`
adapts a model to that interface and applies the unk mask.  Scores are
sums of token log-probabilities, including the eos step.  Ties are broken
toward the lexicographically smaller token-id sequence, which also makes a
size-1 beam reproduce greedy exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from . import model as M
from .autodiff import Tensor
from .training import example_forward

__all__ = [
    "DecodeConfig",
    "DecodeInput",
    "Hypothesis",
    "DecodeSession",
    "greedy_decode",
    "beam_search",
    "greedy_steps",
    "beam_search_steps",
    "rescore",
]

StepFn = Callable[[object, int], tuple[np.ndarray, object]]


@dataclass(frozen=True)
class DecodeInput:
    """Conditioning inputs for generation (no gold comment needed)."""

    x: tuple[int, ...]
    f: np.ndarray
    d: tuple[int, ...]
    user_id: str = ""


@dataclass(frozen=True)
class DecodeConfig:
    """Beam width, length budget, and the length-normalization exponent.

    Candidates are ranked by log_prob / len(tokens)**length_norm; the
    default exponent 0 ranks by raw log-probability.
    """

    beam_size: int = 10
    max_len: int = 20
    length_norm: float = 0.0

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")
        if self.length_norm < 0:
            raise ValueError(f"length_norm must be >= 0, got {self.length_norm}")


@dataclass(frozen=True)
class Hypothesis:
    """A (possibly finished) decoded prefix.

    ``tokens`` includes the trailing eos when finished; ``log_prob`` is the
    sum over all steps taken, eos included.
    """

    tokens: tuple[int, ...]
    log_prob: float
    finished: bool

    @property
    def content_tokens(self) -> tuple[int, ...]:
        """Tokens without the eos terminator."""
        return self.tokens[:-1] if self.finished else self.tokens

    def score(self, length_norm: float = 0.0) -> float:
        if length_norm == 0.0:
            return self.log_prob
        return self.log_prob / max(len(self.tokens), 1) ** length_norm


class DecodeSession:
    """Precomputed encoder/user work for decoding one (blog, user) pair.

    Step log-probabilities are plain numpy arrays with the unk id (when the
    config has one) masked to -inf so it can never be emitted.
    """

    def __init__(self, params: M.ModelParams, example):
        self.params = params
        self.config = params.config
        self._blog_states, self._desc_states, self._v_u, self._initial = example_forward(params, example)

    def initial_state(self) -> M.DecoderState:
        return self._initial

    def step(self, state: M.DecoderState, y_prev: int) -> tuple[np.ndarray, M.DecoderState]:
        result = M.decoder_step(
            self.params, state, y_prev, self._blog_states, self._desc_states, self._v_u
        )
        logits = result.logits.array
        unk = self.config.unk_id
        if unk is not None:
            logits = logits.copy()
            logits[unk] = -np.inf
        return _log_softmax_np(logits), result.state


def _log_softmax_np(logits: np.ndarray) -> np.ndarray:
    m = np.max(logits[np.isfinite(logits)])
    shifted = logits - m
    with np.errstate(divide="ignore"):  # exp(-inf) = 0 for masked entries
        return shifted - np.log(np.sum(np.exp(shifted)))


def greedy_steps(step_fn: StepFn, initial_state, bos_id: int, eos_id: int, max_len: int) -> Hypothesis:
    """Argmax walk; numpy argmax takes the lowest index on ties."""
    state = initial_state
    tokens: list[int] = []
    log_prob = 0.0
    prev = bos_id
    for _ in range(max_len):
        lp, state = step_fn(state, prev)
        tok = int(np.argmax(lp))
        tokens.append(tok)
        log_prob += float(lp[tok])
        if tok == eos_id:
            return Hypothesis(tuple(tokens), log_prob, True)
        prev = tok
    return Hypothesis(tuple(tokens), log_prob, False)


def beam_search_steps(
    step_fn: StepFn,
    initial_state,
    bos_id: int,
    eos_id: int,
    vocab_size: int,
    config: DecodeConfig,
    prune: bool = True,
) -> list[Hypothesis]:
    """Beam search over a step function.

    Keeps the beam_size best unfinished prefixes per step; finished
    hypotheses move to a pool.  Returns up to beam_size hypotheses sorted
    by score (ties: lexicographically smaller token sequence first),
    padding with the best unfinished prefixes when fewer than beam_size
    finish.

    Early stop ("pruning") fires only with length_norm == 0, where scores
    can only fall with length: once beam_size hypotheses are pooled and
    the best live prefix already scores strictly below the pool's worst
    member, no extension can enter the result.
    """
    beam: list[tuple[Hypothesis, object]] = [(Hypothesis((), 0.0, False), initial_state)]
    pool: list[Hypothesis] = []
    can_prune = prune and config.length_norm == 0.0

    for _ in range(config.max_len):
        candidates: list[tuple[float, tuple[int, ...], float, object]] = []
        for hyp, state in beam:
            prev = hyp.tokens[-1] if hyp.tokens else bos_id
            lp, new_state = step_fn(state, prev)
            if lp.shape != (vocab_size,):
                raise ValueError(f"step function returned {lp.shape}, expected ({vocab_size},)")
            for tok in range(vocab_size):
                tlp = float(lp[tok])
                if tlp == -np.inf:
                    continue
                total = hyp.log_prob + tlp
                candidates.append((total, hyp.tokens + (tok,), total, new_state))
        if not candidates:
            break
        norm = config.length_norm
        if norm != 0.0:
            candidates = [
                (raw / max(len(toks), 1) ** norm, toks, raw, st)
                for (_, toks, raw, st) in candidates
            ]
        candidates.sort(key=lambda c: (-c[0], c[1]))
        next_beam: list[tuple[Hypothesis, object]] = []
        for scored, toks, raw, st in candidates[: config.beam_size]:
            if toks[-1] == eos_id:
                pool.append(Hypothesis(toks, raw, True))
            else:
                next_beam.append((Hypothesis(toks, raw, False), st))
        beam = next_beam
        if not beam:
            break
        if can_prune and len(pool) >= config.beam_size:
            worst_pooled = sorted(h.log_prob for h in pool)[-config.beam_size]
            best_live = max(h.log_prob for h, _ in beam)
            if best_live < worst_pooled:
                break

    def rank_key(h: Hypothesis):
        return (-h.score(config.length_norm), h.tokens)

    ranked = sorted(pool, key=rank_key)[: config.beam_size]
    if len(ranked) < config.beam_size and beam:
        leftovers = sorted((h for h, _ in beam), key=rank_key)
        ranked.extend(leftovers[: config.beam_size - len(ranked)])
    return ranked


def greedy_decode(params: M.ModelParams, example, max_len: int = 20) -> Hypothesis:
    """Greedy decoding for one encoded input (the comment field is unused)."""
    session = DecodeSession(params, example)
    cfg = params.config
    return greedy_steps(session.step, session.initial_state(), cfg.bos_id, cfg.eos_id, max_len)


def beam_search(params: M.ModelParams, example, config: DecodeConfig = DecodeConfig(), prune: bool = True) -> list[Hypothesis]:
    """Beam-search decoding for one encoded input."""
    session = DecodeSession(params, example)
    cfg = params.config
    return beam_search_steps(
        session.step, session.initial_state(), cfg.bos_id, cfg.eos_id,
        cfg.vocab_size, config, prune=prune,
    )


def rescore(params: M.ModelParams, example, hypothesis: Hypothesis) -> float:
    """Teacher-force the hypothesis tokens and sum their log-probabilities.

    Matches Hypothesis.log_prob to float tolerance for any hypothesis the
    decoders emit on the same inputs.
    """
    session = DecodeSession(params, example)
    state = session.initial_state()
    prev = params.config.bos_id
    total = 0.0
    for tok in hypothesis.tokens:
        lp, state = session.step(state, prev)
        total += float(lp[tok])
        prev = tok
    return total
