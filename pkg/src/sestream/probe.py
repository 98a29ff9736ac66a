"""Empirical receptive-field verification.

The dependency matrix is measured, not computed symbolically: either by
backpropagating gradients from each output frame to the input, or by
perturbing each input frame and diffing the outputs.  assert_block_causal
then checks the block-lower-triangular structure and the per-token look-ahead
against the stride grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .grad import Tensor

SENSITIVITY_THRESHOLD = 1e-12  # applied after normalizing by the max sensitivity


def dependency_matrix(
    fn,
    in_shape: tuple[int, int, int],
    method: str = "gradient",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Boolean (out_frame x in_frame) sensitivity matrix of fn.

    fn maps a Tensor of shape (1, C, F, T) to a Tensor (1, C', F', T').  The
    gradient method backpropagates a fixed random projection of each output
    frame; the perturbation method adds a unit impulse to each input frame.
    Both aggregate |sensitivity| over channels and frequency bins.
    """
    if method not in ("gradient", "perturbation"):
        raise DomainError(f"method must be gradient|perturbation, got {method!r}")
    rng = rng or np.random.default_rng(0)
    c, f, t = in_shape
    x0 = rng.standard_normal((1, c, f, t))
    base = fn(Tensor(x0)).data
    if not np.all(np.isfinite(base)):
        raise NumericError("model output is non-finite")
    t_out = base.shape[3]
    sens = np.zeros((t_out, t))

    if method == "gradient":
        proj = rng.standard_normal(base.shape[:3])  # fixed projection over (1, C', F')
        for i in range(t_out):
            xin = Tensor(x0, requires_grad=True)
            out = fn(xin)
            loss = (out * _frame_selector(out.data.shape, i, proj)).sum()
            loss.backward()
            g = xin.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError("non-finite sensitivities in gradient probe")
            sens[i] = np.abs(g[0]).sum(axis=(0, 1))
    else:
        for j in range(t):
            xp = x0.copy()
            xp[:, :, :, j] += 1.0
            out = fn(Tensor(xp)).data
            if not np.all(np.isfinite(out)):
                raise NumericError("non-finite sensitivities in perturbation probe")
            sens[:, j] = np.abs(out - base).sum(axis=(0, 1, 2))

    peak = sens.max()
    if peak <= 0.0:
        return np.zeros((t_out, t), dtype=bool)
    return sens / peak > SENSITIVITY_THRESHOLD


def _frame_selector(shape, frame: int, proj: np.ndarray) -> Tensor:
    sel = np.zeros(shape)
    sel[:, :, :, frame] = proj
    return Tensor(sel)


@dataclass
class CausalityReport:
    block_size: int
    violations: list
    lookahead: list
    expected_lookahead: list

    @property
    def passed(self) -> bool:
        """No output block depends on a later input block."""
        return not self.violations

    @property
    def lookahead_exact(self) -> bool:
        """Measured look-ahead equals the stride-grid expectation everywhere."""
        return self.lookahead == self.expected_lookahead

    def summary(self) -> str:
        if self.passed:
            head = f"block-causal: PASS (g={self.block_size}, {len(self.lookahead)} frames)"
            if not self.lookahead_exact:
                head += " [look-ahead below the exact bound on some frames]"
            return head
        lines = [f"block-causal: FAIL (g={self.block_size})"]
        worst = self.violations[:5]
        lines.append(f"  {len(self.violations)} block violations, first: {worst}")
        return "\n".join(lines)


def assert_block_causal(dep: np.ndarray, g: int) -> CausalityReport:
    """Check output block i depends on no input block > i (blocks anchored at the newest frame).

    Violations are reported, not raised.  Also reports the measured look-ahead
    of each output frame against the exact expectation: the i-th token of a
    block (i = 1..g) looks ahead g - i frames.
    """
    if g < 1:
        raise DomainError("block size must be >= 1")
    t_out, t_in = dep.shape
    violations = []
    lookahead = []
    expected = []
    for i in range(t_out):
        exp_la = (t_in - 1 - i) % g if i < t_in else 0
        block_end = min(i + exp_la, t_in - 1)
        cols = np.where(dep[i])[0]
        newest = int(cols.max()) if cols.size else i
        lookahead.append(newest - i)
        expected.append(block_end - i)
        for j in cols:
            if j > block_end:
                violations.append((int(i), int(j)))
    return CausalityReport(g, violations, lookahead, expected)


def dep_to_text(dep: np.ndarray) -> str:
    """Plain-text grid: '#' marks a dependency."""
    return "\n".join("".join("#" if v else "." for v in row) for row in dep)


def dep_to_pgm(dep: np.ndarray) -> bytes:
    """ASCII PGM image, white where output depends on input."""
    h, w = dep.shape
    lines = [f"P2", f"{w} {h}", "255"]
    for row in dep:
        lines.append(" ".join("255" if v else "0" for v in row))
    return ("\n".join(lines) + "\n").encode()
