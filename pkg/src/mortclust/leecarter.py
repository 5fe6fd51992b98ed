"""Single-population Lee-Carter fits on log death rates.

The model is log(m_xt) = alpha_x + beta_x * kappa_t + eps_xt.  alpha is the
age profile of mean log rates; (beta, kappa) come from the leading singular
triplet of the row-centered log-rate matrix.  Two normalizations are used:
STANDARD (sum beta = 1, sum kappa = 0) for fitting, and UNIT_DRIFT (kappa
endpoint drift = 1) as the comparable age-effect parameterization consumed
by clustering.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import DegenerateDriftError, DegenerateFitError, DomainError

CONSTRAINT_TOL = 1e-10


class Normalization(enum.Enum):
    STANDARD = "standard"
    UNIT_DRIFT = "unit_drift"


@dataclass(frozen=True)
class LeeCarterFit:
    """One country's fitted decomposition.

    The residual matrix is the centered input minus the rank-1 term and is
    identical under either normalization; ``explained`` is the share of
    centered variance carried by the leading singular value.
    """

    alpha: np.ndarray
    beta: np.ndarray
    kappa: np.ndarray
    normalization: Normalization
    residuals: np.ndarray
    explained: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        kappa = np.asarray(self.kappa, dtype=float)
        residuals = np.asarray(self.residuals, dtype=float)
        if alpha.ndim != 1 or beta.ndim != 1 or kappa.ndim != 1:
            raise DomainError("alpha, beta, kappa must be vectors")
        if alpha.shape != beta.shape:
            raise DomainError(
                f"alpha has {alpha.size} ages but beta has {beta.size}"
            )
        if residuals.shape != (alpha.size, kappa.size):
            raise DomainError(
                f"residuals shape {residuals.shape} does not match "
                f"({alpha.size}, {kappa.size})"
            )
        for name, arr in (("alpha", alpha), ("beta", beta), ("kappa", kappa)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite values")
        for name, arr in (
            ("alpha", alpha),
            ("beta", beta),
            ("kappa", kappa),
            ("residuals", residuals),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "explained", float(self.explained))
        if self.normalization is Normalization.STANDARD:
            if abs(beta.sum() - 1.0) > CONSTRAINT_TOL:
                raise DomainError(f"STANDARD requires sum(beta)=1, got {beta.sum()!r}")
            if abs(kappa.sum()) > CONSTRAINT_TOL * max(1.0, np.abs(kappa).max()):
                raise DomainError(f"STANDARD requires sum(kappa)=0, got {kappa.sum()!r}")
        elif self.normalization is Normalization.UNIT_DRIFT:
            if abs(self.drift - 1.0) > CONSTRAINT_TOL:
                raise DomainError(f"UNIT_DRIFT requires drift=1, got {self.drift!r}")

    @property
    def n_ages(self) -> int:
        return self.alpha.size

    @property
    def n_years(self) -> int:
        return self.kappa.size

    @property
    def drift(self) -> float:
        """Endpoint drift (kappa_T - kappa_1)/(T - 1)."""
        if self.kappa.size < 2:
            raise DomainError("drift needs at least 2 years")
        return float((self.kappa[-1] - self.kappa[0]) / (self.kappa.size - 1))

    def fitted(self) -> np.ndarray:
        """Reconstructed log-rate surface alpha + beta kappa^T (no residual)."""
        return self.alpha[:, None] + np.outer(self.beta, self.kappa)


def fit_lee_carter(logm: np.ndarray) -> LeeCarterFit:
    """Fit by SVD of the row-centered age x year log-rate matrix.

    Returns the STANDARD normalization: sum(beta) = 1, sum(kappa) = 0, with
    the sign fixed so the beta normalizer is applied to a nonnegative sum.
    """
    logm = np.asarray(logm, dtype=float)
    if logm.ndim != 2:
        raise DomainError(f"expected an age x year matrix, got ndim={logm.ndim}")
    n_ages, n_years = logm.shape
    if n_ages < 2 or n_years < 2:
        raise DomainError(f"need at least 2 ages and 2 years, got {logm.shape}")
    if not np.all(np.isfinite(logm)):
        raise DomainError("log-rate matrix contains non-finite values")

    alpha = logm.mean(axis=1)
    centered = logm - alpha[:, None]
    scale = max(1.0, float(np.abs(logm).max()))
    if float(np.abs(centered).max()) <= 1e-12 * scale:
        raise DegenerateFitError(
            "centered log-rate matrix is numerically zero (constant in time)"
        )

    # full SVD: at 24 x 51 exactness beats iterative speed
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    beta = u[:, 0]
    kappa = s[0] * vt[0]
    b = float(beta.sum())
    if b < 0:
        beta, kappa, b = -beta, -kappa, -b
    if b <= 1e-12:
        raise DegenerateFitError(
            "leading age vector sums to zero; sum(beta)=1 normalization undefined"
        )
    beta = beta / b
    kappa = kappa * b
    # the right singular vector of a row-centered matrix is already mean-free;
    # fold any floating remainder into alpha so the constraint holds exactly
    shift = kappa.mean()
    alpha = alpha + beta * shift
    kappa = kappa - shift

    rank1 = np.outer(beta, kappa)
    residuals = logm - alpha[:, None] - rank1
    explained = float(s[0] ** 2 / np.sum(s**2))
    return LeeCarterFit(
        alpha=alpha,
        beta=beta,
        kappa=kappa,
        normalization=Normalization.STANDARD,
        residuals=residuals,
        explained=explained,
    )


def rescale_unit_drift(fit: LeeCarterFit) -> LeeCarterFit:
    """Reparameterize so the kappa endpoint drift equals 1.

    beta' = beta * c and kappa' = kappa / c with c the drift of the input,
    leaving the fitted surface unchanged.  Idempotent: a UNIT_DRIFT fit is
    returned as-is.
    """
    if fit.normalization is Normalization.UNIT_DRIFT:
        return fit
    c = fit.drift
    # relative guard: an endpoint difference at rounding level is no drift
    scale = max(1.0, float(np.abs(fit.kappa).max()))
    if abs(fit.kappa[-1] - fit.kappa[0]) <= 1e-12 * scale:
        raise DegenerateDriftError("kappa endpoint drift is zero; cannot rescale")
    return LeeCarterFit(
        alpha=fit.alpha,
        beta=fit.beta * c,
        kappa=fit.kappa / c,
        normalization=Normalization.UNIT_DRIFT,
        residuals=fit.residuals,
        explained=fit.explained,
    )


def write_beta_csv(
    fits: Mapping[str, LeeCarterFit],
    age_labels: Sequence[str],
    path: str | Path,
) -> None:
    """Export (country, age_label, beta) rows for the fitted age effects."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("country", "age_label", "beta"))
        for country in sorted(fits):
            fit = fits[country]
            if fit.n_ages != len(age_labels):
                raise DomainError(
                    f"{country}: fit has {fit.n_ages} ages, "
                    f"labels give {len(age_labels)}"
                )
            for label, b in zip(age_labels, fit.beta):
                writer.writerow((country, label, repr(float(b))))
