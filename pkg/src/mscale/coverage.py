"""Monte Carlo coverage of the confidence region and of the bands."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bands import BAND_METHODS, band_by_name
from .errors import ParameterError
from .grid import TestFunction, estimate_sigma, generate_data
from .multires import RegionSpec, is_member, parse_family


@dataclass(frozen=True)
class CoverageResult:
    hits: int
    reps: int

    @property
    def proportion(self) -> float:
        return self.hits / self.reps

    @property
    def se(self) -> float:
        p = self.proportion
        return math.sqrt(p * (1 - p) / self.reps)

    def __str__(self):
        return f"{self.proportion:.4f} +/- {self.se:.4f} ({self.hits}/{self.reps})"


def replication_data(f: TestFunction, n: int, sigma: float, seed: int, rep: int):
    """Data for one replication; the noise stream depends only on (seed, rep)."""
    return generate_data(f, n, sigma, seed=[seed, rep])


def _one(args):
    f, n, sigma, tau, family, method, seed, rep, sigma_mode, opts = args
    s = replication_data(f, n, sigma, seed, rep)
    sig = estimate_sigma(s) if sigma_mode == "estimated" else sigma
    spec = RegionSpec(sig, parse_family(family, n), tau)
    truth = f(s.t)
    if method == "region":
        return is_member(s, truth, spec)
    band = band_by_name(method, s, spec, **opts)
    return band.contains(truth)


def _chunk(batch):
    return sum(bool(_one(a)) for a in batch)


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("MSCALE_THREADS")
    n = requested if requested is not None else 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ParameterError("MSCALE_THREADS must be an integer") from exc
    return max(1, n)


def simulate_coverage(f: TestFunction, n: int, sigma: float, tau: float = 3.0,
                      family: str = "dyadic:2", method: str = "region", reps: int = 1000,
                      seed: int = 0, sigma_mode: str = "known", workers: int | None = None,
                      **band_opts) -> CoverageResult:
    """Proportion of replications in which f is covered.

    ``method='region'`` counts f in the confidence region; any band method
    name counts lb <= f <= ub at every design point.  ``sigma_mode`` is
    'known' (use ``sigma``) or 'estimated'.  Results do not depend on the
    number of workers.
    """
    if method != "region" and method not in BAND_METHODS:
        raise ParameterError(f"unknown method {method!r}")
    if sigma_mode not in ("known", "estimated"):
        raise ParameterError("sigma_mode must be 'known' or 'estimated'")
    if reps < 1 or n < 2:
        raise ParameterError("need reps >= 1 and n >= 2")
    parse_family(family, n)
    jobs = [(f, n, sigma, tau, family, method, seed, r, sigma_mode, band_opts)
            for r in range(reps)]
    w = worker_count(workers)
    if w == 1:
        hits = _chunk(jobs)
    else:
        batches = [jobs[i::w] for i in range(w)]
        with ProcessPoolExecutor(max_workers=w) as ex:
            hits = sum(ex.map(_chunk, batches))
    return CoverageResult(int(hits), reps)
