"""KAN layers: a matrix of learnable univariate functions.

Each output coordinate q applies its own degree-d polynomial expansion to
every input coordinate p and sums the results,

    out[q] = sum_p sum_r gamma[q, p, r] * P_r(squash(x[p])).

Inputs are squashed onto the basis domain with a tanh map before
evaluation.  A `linear` mode swaps the expansion for a plain bias-free
weight matrix so the same network can be run as an MLP variant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .basis import Basis
from .errors import ContractError, DimensionError
from .tensor import Tensor


@dataclass(frozen=True)
class DomainMap:
    """Monotone squash of the reals onto (lo, hi) via tanh."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ContractError(f"domain map needs lo < hi, got ({self.lo}, {self.hi})")

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * 0.5 * (np.tanh(x) + 1.0)

    def apply_with_deriv(self, x: np.ndarray) -> tuple:
        t = np.tanh(x)
        s = self.lo + (self.hi - self.lo) * 0.5 * (t + 1.0)
        ds = (self.hi - self.lo) * 0.5 * (1.0 - t * t)
        return s, ds


def squash(x, lo: float, hi: float):
    return DomainMap(lo, hi).apply(np.asarray(x, dtype=np.float64))


class KanLayer:
    """One layer mapping in_dim inputs to out_dim outputs.

    kan mode stores coefficients gamma[out_dim, in_dim, degree + 1] drawn
    from Normal(0, sqrt(init_scale / in_dim)).  linear mode stores a weight
    matrix [out_dim, in_dim] drawn from Uniform(-k, k) with k = sqrt(1 / in_dim)
    and applies x @ W^T with no bias.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        basis: Basis | None = None,
        mode: str = "kan",
        rng: np.random.Generator | None = None,
        init_scale: float = 1.0,
    ):
        if mode not in ("kan", "linear"):
            raise ContractError(f"unknown layer mode {mode!r}")
        if mode == "kan" and basis is None:
            raise ContractError("kan mode requires a basis")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.mode = mode
        self.basis = basis
        if mode == "kan":
            self.squash = DomainMap(*basis.domain)
            std = np.sqrt(init_scale / in_dim)
            init = rng.normal(0.0, std, size=(out_dim, in_dim, basis.size))
        else:
            self.squash = None
            k = np.sqrt(1.0 / in_dim)
            init = rng.uniform(-k, k, size=(out_dim, in_dim))
        self.gamma = Tensor(init, requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        if self.mode == "kan":
            return self.kan_forward(x)
        return self.linear_forward(x)

    __call__ = forward

    def kan_forward(self, x: Tensor) -> Tensor:
        """Fused evaluation of the whole coefficient block.

        Basis values are computed once per input element and shared across
        all out_dim outputs; the contraction runs as one matrix product
        per degree.  The backward rule routes through the basis
        derivatives and the squash slope.
        """
        if self.mode != "kan":
            raise ContractError("kan_forward called on a linear-mode layer")
        if x.shape[-1] != self.in_dim:
            raise DimensionError(
                f"kan layer expects trailing extent {self.in_dim}, got {x.shape}"
            )
        gamma = self.gamma
        need_grad = tt.grad_enabled() and (x.requires_grad or gamma.requires_grad)
        s, dsdx = self.squash.apply_with_deriv(x.data)
        if need_grad:
            vals, ders = self.basis.eval_terms_with_deriv(s)
        else:
            vals = self.basis.eval_terms(s)
            ders = None
        # one matrix product per degree keeps every array contiguous
        flat_vals = [v.reshape(-1, self.in_dim) for v in vals]
        weights = [np.ascontiguousarray(gamma.data[:, :, r])
                   for r in range(self.basis.size)]
        flat_out = flat_vals[0] @ weights[0].T
        for r in range(1, self.basis.size):
            flat_out += flat_vals[r] @ weights[r].T
        out_data = flat_out.reshape(x.shape[:-1] + (self.out_dim,))

        def back(g):
            flat_g = g.reshape(-1, self.out_dim)
            if gamma.requires_grad:
                slabs = [flat_g.T @ fv for fv in flat_vals]
                gamma.accumulate_grad(np.stack(slabs, axis=-1))
            if x.requires_grad:
                flat_d = [d.reshape(-1, self.in_dim) for d in ders]
                gx = (flat_g @ weights[0]) * flat_d[0]
                for r in range(1, self.basis.size):
                    gx += (flat_g @ weights[r]) * flat_d[r]
                x.accumulate_grad((gx * dsdx.reshape(-1, self.in_dim)).reshape(x.shape))

        return tt._make(out_data, (x, gamma), back)

    def linear_forward(self, x: Tensor) -> Tensor:
        if self.mode != "linear":
            raise ContractError("linear_forward called on a kan-mode layer")
        if x.shape[-1] != self.in_dim:
            raise DimensionError(
                f"linear layer expects trailing extent {self.in_dim}, got {x.shape}"
            )
        return tt.matmul(x, tt.transpose(self.gamma))

    def param_count(self) -> int:
        if self.mode == "kan":
            return self.in_dim * self.out_dim * self.basis.size
        return self.in_dim * self.out_dim
