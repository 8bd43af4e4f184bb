from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class BoundReport:
    """Outcome of one empirical check of an analytic estimate.

    ``passed`` is true exactly when ``measured`` satisfies the declared
    relation to ``reference`` (the relation is named in ``params["rule"]``).
    """

    name: str
    measured: float
    reference: float
    params: dict = field(default_factory=dict)
    passed: bool = False

    def row(self) -> dict:
        out = {"name": self.name, "measured": self.measured,
               "reference": self.reference, "pass": int(self.passed)}
        out.update({f"param_{k}": v for k, v in self.params.items()})
        return out


def check_below(name: str, measured: float, bound: float, **params) -> BoundReport:
    return BoundReport(name, float(measured), float(bound),
                       dict(params, rule="measured <= reference"), bool(measured <= bound))


def check_within(name: str, measured: float, reference: float, tol: float, **params) -> BoundReport:
    ok = abs(measured - reference) <= tol
    return BoundReport(name, float(measured), float(reference),
                       dict(params, rule=f"|measured - reference| <= {tol!r}"), bool(ok))
