"""GRU encoder and the three self-attention mechanisms.

Sequences are handled in a *time-major stack*: T blocks of R rows, where row
``t*R + r`` is time step t of sequence r.  A single sequence is the R = 1
case.  Masks are boolean R x T arrays with True on real steps.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import numcore as nc
from .errors import DegenerateInputError, DimensionError
from .numcore import Tensor


@dataclass
class GruParams:
    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    @property
    def hidden_dim(self) -> int:
        return self.U_z.rows

    @property
    def input_dim(self) -> int:
        return self.W_z.cols

    def validate(self):
        h, d = self.hidden_dim, self.input_dim
        for name in ("W_z", "W_r", "W_h"):
            _expect(self, name, (h, d))
        for name in ("U_z", "U_r", "U_h"):
            _expect(self, name, (h, h))
        for name in ("b_z", "b_r", "b_h"):
            _expect(self, name, (1, h))
        return self


@dataclass
class AttentionParams:
    W_s: Tensor
    b_s: Tensor
    u_s: Tensor
    W_c: Tensor | None = None

    @property
    def att_dim(self) -> int:
        return self.W_s.rows

    @property
    def context_dim(self) -> int | None:
        return None if self.W_c is None else self.W_c.cols

    def validate(self):
        k = self.att_dim
        _expect(self, "W_s", (k, k))
        _expect(self, "b_s", (1, k))
        _expect(self, "u_s", (1, k))
        if self.W_c is not None and self.W_c.rows != k:
            raise DimensionError(f"W_c has {self.W_c.rows} rows, attention dim is {k}")
        return self


@dataclass
class GateParams:
    W_l1: Tensor
    W_l2: Tensor
    b_l: Tensor

    def validate(self, att_dim: int, context_dim: int):
        _expect(self, "W_l1", (att_dim, att_dim))
        _expect(self, "W_l2", (att_dim, context_dim))
        _expect(self, "b_l", (1, att_dim))
        return self


@dataclass
class AttentionOutput:
    weights: Tensor  # R x T
    pooled: Tensor  # R x att_dim
    alignments: Tensor  # R x T, pre-softmax scores
    gates: Tensor | None = None  # T*R x att_dim, gated mechanism only


def _expect(obj, name, shape):
    t = getattr(obj, name)
    if t.shape != tuple(shape):
        raise DimensionError(f"{type(obj).__name__}.{name}: expected {tuple(shape)}, got {t.shape}")


def params_from(cls, tensors: dict[str, Tensor], prefix: str):
    """Build a parameter dataclass from ``prefix.<field>`` entries."""
    kwargs = {}
    for f in fields(cls):
        key = f"{prefix}.{f.name}"
        if key in tensors:
            kwargs[f.name] = tensors[key]
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# GRU


def gru_step(x: Tensor, h_prev: Tensor, p: GruParams) -> Tensor:
    """One GRU transition for every row of ``x``.

    z = sigma(W_z x + U_z h + b_z), r = sigma(W_r x + U_r h + b_r),
    h~ = tanh(W_h x + U_h (r * h) + b_h), h' = (1 - z) * h + z * h~.
    """
    if x.cols != p.input_dim or h_prev.cols != p.hidden_dim or x.rows != h_prev.rows:
        raise DimensionError(
            f"gru_step: input {x.shape} / state {h_prev.shape} do not fit "
            f"input_dim={p.input_dim}, hidden_dim={p.hidden_dim}"
        )
    xz = nc.add(nc.linear(x, p.W_z), p.b_z)
    xr = nc.add(nc.linear(x, p.W_r), p.b_r)
    xh = nc.add(nc.linear(x, p.W_h), p.b_h)
    return _gru_projected(xz, xr, xh, h_prev, p)


def _gru_projected(xz, xr, xh, h, p: GruParams) -> Tensor:
    z = nc.sigmoid(nc.add(xz, nc.linear(h, p.U_z)))
    r = nc.sigmoid(nc.add(xr, nc.linear(h, p.U_r)))
    cand = nc.tanh(nc.add(xh, nc.linear(nc.mul(r, h), p.U_h)))
    return nc.add(nc.mul(nc.one_minus(z), h), nc.mul(z, cand))


def run_gru(stack: Tensor, R: int, p: GruParams, mask: np.ndarray, reverse: bool = False) -> list[Tensor]:
    """Run one GRU direction over a time-major stack.

    Input projections for all steps are computed up front in one product per
    gate.  Masked steps carry the previous state through unchanged.  Returns
    the T states in time order (not processing order).
    """
    T = stack.rows // R
    if T == 0:
        raise DegenerateInputError("run_gru: empty sequence")
    if stack.rows != T * R or stack.cols != p.input_dim:
        raise DimensionError(f"run_gru: stack {stack.shape} does not fit R={R}, input_dim={p.input_dim}")
    mask = np.asarray(mask, dtype=bool).reshape(R, T)
    pz = nc.add(nc.linear(stack, p.W_z), p.b_z)
    pr = nc.add(nc.linear(stack, p.W_r), p.b_r)
    ph = nc.add(nc.linear(stack, p.W_h), p.b_h)
    h = nc.zeros(R, p.hidden_dim)
    states: list[Tensor | None] = [None] * T
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        lo, hi = t * R, (t + 1) * R
        new = _gru_projected(
            nc.slice_rows(pz, lo, hi), nc.slice_rows(pr, lo, hi), nc.slice_rows(ph, lo, hi), h, p
        )
        m = mask[:, t]
        h = new if m.all() else nc.select(m, new, h)
        states[t] = h
    return states


def run_bigru_stacked(stack: Tensor, R: int, fwd: GruParams, bwd: GruParams, mask: np.ndarray) -> Tensor:
    """Bidirectional GRU over a time-major stack; returns T*R x 2h annotations."""
    f = run_gru(stack, R, fwd, mask)
    b = run_gru(stack, R, bwd, mask, reverse=True)
    return nc.concat_cols([nc.concat_rows(f), nc.concat_rows(b)])


def run_bigru(seq: Tensor, fwd: GruParams, bwd: GruParams, mask=None) -> Tensor:
    """Annotate one sequence (T x input_dim); row t is [forward_t; backward_t]."""
    if seq.rows == 0:
        raise DegenerateInputError("run_bigru: empty sequence")
    if mask is None:
        mask = np.ones(seq.rows, dtype=bool)
    return run_bigru_stacked(seq, 1, fwd, bwd, np.asarray(mask, dtype=bool).reshape(1, -1))


# ---------------------------------------------------------------------------
# attention


def attend(
    stack: Tensor,
    R: int,
    mask: np.ndarray,
    att: AttentionParams,
    context: Tensor | None = None,
    gate: GateParams | None = None,
    allow_empty: bool = False,
) -> AttentionOutput:
    """Self-attention pooling of R sequences held in a time-major stack.

    Plain:   e_t = u . tanh(W_s h_t + b_s)
    Context: e_t = u . tanh(W_s h_t + W_c c + b_s)
    Gated:   e_t = u . tanh((1 - g_t) * W_s h_t + g_t * W_c c + b_s),
             g_t = sigma(W_l1 h_t + W_l2 c + b_l)

    ``context`` is R x context_dim, one row per sequence, shared by its steps.
    """
    T = stack.rows // R
    if stack.rows != T * R or T == 0:
        raise DimensionError(f"attend: stack {stack.shape} is not T blocks of R={R} rows")
    if stack.cols != att.att_dim:
        raise DimensionError(f"attend: annotation width {stack.cols} != attention dim {att.att_dim}")
    mask = np.asarray(mask, dtype=bool).reshape(R, T)
    if not allow_empty and not mask.any(axis=1).all():
        raise DegenerateInputError("attend: every step of a sequence is masked")

    proj = nc.linear(stack, att.W_s)
    gates = None
    if context is None:
        pre = nc.add(proj, att.b_s)
    else:
        if att.W_c is None:
            raise DimensionError("attend: context given but attention has no W_c")
        if context.cols != att.context_dim or context.rows != R:
            raise DimensionError(
                f"attend: context {context.shape} does not fit R={R}, context_dim={att.context_dim}"
            )
        cproj = nc.tile_rows(nc.linear(context, att.W_c), T)
        if gate is None:
            pre = nc.add(nc.add(proj, cproj), att.b_s)
        else:
            gate.validate(att.att_dim, att.context_dim)
            gates = nc.sigmoid(
                nc.add(nc.add(nc.linear(stack, gate.W_l1), nc.tile_rows(nc.linear(context, gate.W_l2), T)), gate.b_l)
            )
            pre = nc.add(nc.add(nc.mul(nc.one_minus(gates), proj), nc.mul(gates, cproj)), att.b_s)
    scores = nc.linear(nc.tanh(pre), att.u_s)  # T*R x 1
    align = nc.transpose(nc.reshape(scores, T, R))
    weights = nc.softmax_masked(align, mask, allow_empty=allow_empty)
    pooled = nc.pool_time(stack, weights)
    return AttentionOutput(weights=weights, pooled=pooled, alignments=align, gates=gates)


def _one_sequence_mask(annotations: Tensor, mask):
    if mask is None:
        return np.ones((1, annotations.rows), dtype=bool)
    return np.asarray(mask, dtype=bool).reshape(1, -1)


def _as_row(context) -> Tensor:
    if not isinstance(context, Tensor):
        context = Tensor(context)
    if context.rows != 1:
        context = nc.reshape(context, 1, context.value.size)
    return context


def attend_plain(annotations: Tensor, att: AttentionParams, mask=None) -> AttentionOutput:
    """Attention over one annotated sequence (T x att_dim)."""
    return attend(annotations, 1, _one_sequence_mask(annotations, mask), att)


def attend_context(annotations: Tensor, context, att: AttentionParams, mask=None) -> AttentionOutput:
    return attend(annotations, 1, _one_sequence_mask(annotations, mask), att, context=_as_row(context))


def attend_gated(annotations: Tensor, context, att: AttentionParams, gate: GateParams, mask=None) -> AttentionOutput:
    return attend(annotations, 1, _one_sequence_mask(annotations, mask), att, context=_as_row(context), gate=gate)
