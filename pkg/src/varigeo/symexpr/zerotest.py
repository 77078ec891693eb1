"""Probabilistic zero testing with a reproducible seed policy.

``Zero`` is only ever returned for the structural zero. A structurally
nonzero expression is certified ``NonZero`` by a single random evaluation
whose numerator is clearly away from zero relative to the size of its terms.
If every draw is indecisive (singular denominator, domain error, or a
numerator that vanishes at the draw) the test is repeated once with a fresh
seed and then reports ``Unknown``.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import hashlib
import random
from dataclasses import dataclass

from varigeo.errors import DomainError
from varigeo.symexpr.expr import Expr

TOLERANCE = 1e-9
LOW, HIGH = 0.1, 3.0


class Verdict(enum.Enum):
    ZERO = "Zero"
    NONZERO = "NonZero"
    UNKNOWN = "Unknown"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ZeroTestConfig:
    seed: int = 0
    trials: int = 8
    sampler: object = None  # callable(rng, names) -> dict, for tests of the retry policy


_CONFIG = contextvars.ContextVar("zero_test_config", default=ZeroTestConfig())


def current_config() -> ZeroTestConfig:
    return _CONFIG.get()


@contextlib.contextmanager
def zero_test_config(seed=None, trials=None, sampler=None):
    """Temporarily override the seed, trial count or point sampler."""
    old = _CONFIG.get()
    new = ZeroTestConfig(
        old.seed if seed is None else int(seed),
        old.trials if trials is None else int(trials),
        old.sampler if sampler is None else sampler,
    )
    if new.trials < 1:
        raise ValueError("trials must be at least 1")
    token = _CONFIG.set(new)
    try:
        yield new
    finally:
        _CONFIG.reset(token)


def sample_value(rng):
    """Uniform draw from [-3, -0.1] U [0.1, 3]."""
    x = rng.uniform(LOW, HIGH)
    return x if rng.random() < 0.5 else -x


def default_sampler(rng, names):
    return {n: sample_value(rng) for n in sorted(names)}


def _rng(seed, text, attempt):
    digest = hashlib.sha256(f"{seed}:{attempt}:{text}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _atom_values(rng):
    cache = {}

    def value(atom):
        v = cache.get(atom)
        if v is None:
            v = cache[atom] = sample_value(rng)
        return v

    return value


def _decisive(e, rng, sampler):
    point = sampler(rng, e.free)
    try:
        nv, ns, dv, ds = e.eval_parts(point, _atom_values(rng))
    except (DomainError, ArithmeticError, ValueError):
        return False
    if not abs(dv) > TOLERANCE * max(ds, 1e-300):
        return False
    return abs(nv) > TOLERANCE * ns


def is_zero(e: Expr, trials=None, seed=None) -> Verdict:
    """Three-valued zero test: Zero (structural), NonZero (witnessed), or Unknown."""
    if e.is_zero:
        return Verdict.ZERO
    if e.is_constant:
        return Verdict.NONZERO
    cfg = current_config()
    trials = cfg.trials if trials is None else trials
    if trials < 1:
        raise ValueError("trials must be at least 1")
    seed = cfg.seed if seed is None else seed
    sampler = cfg.sampler or default_sampler
    text = e.text
    for attempt in range(2):
        rng = _rng(seed, text, attempt)
        for _ in range(trials):
            if _decisive(e, rng, sampler):
                return Verdict.NONZERO
    return Verdict.UNKNOWN


def is_nonzero(e: Expr) -> bool:
    return is_zero(e) is Verdict.NONZERO
