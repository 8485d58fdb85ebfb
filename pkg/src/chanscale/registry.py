"""Bundled table of the (Re_tau, Pr) combinations with DNS data."""
from __future__ import annotations

from dataclasses import dataclass

RE_TAU = (500.0, 1000.0, 2000.0, 5000.0)
PRANDTL = (0.007, 0.01, 0.02, 0.05, 0.1, 0.3, 0.5, 0.71, 1.0, 2.0, 4.0, 7.0, 10.0)


@dataclass(frozen=True)
class RegistryEntry:
    re_tau: float
    pr: float
    available: bool

    @property
    def pe_tau(self) -> float:
        return self.re_tau * self.pr


def _available(re_tau: float, pr: float) -> bool:
    if re_tau == 5000.0:
        return pr == 0.71
    if pr == 10.0:
        return re_tau == 500.0
    return True


class CaseRegistry:
    def __init__(self, entries):
        self.entries = tuple(entries)

    @classmethod
    def default(cls) -> "CaseRegistry":
        return cls(RegistryEntry(re, pr, _available(re, pr)) for re in RE_TAU for pr in PRANDTL)

    def available(self) -> list[RegistryEntry]:
        return [e for e in self.entries if e.available]

    def lookup(self, re_tau: float, pr: float, rel_tol=1e-9) -> RegistryEntry | None:
        for e in self.entries:
            if abs(e.re_tau - re_tau) <= rel_tol * e.re_tau and abs(e.pr - pr) <= rel_tol * e.pr:
                return e
        return None

    def match(self, case) -> dict:
        entry = self.lookup(case.re_tau, case.pr)
        return {
            "in_table": entry is not None,
            "available": bool(entry and entry.available),
            "re_tau": case.re_tau,
            "pr": case.pr,
            "pe_tau": case.pe_tau,
        }

    def to_rows(self) -> list[dict]:
        return [{"re_tau": e.re_tau, "pr": e.pr, "pe_tau": e.pe_tau, "available": e.available}
                for e in self.entries]

    def format_table(self) -> str:
        head = "Re_tau\\Pr " + " ".join(f"{p:>6g}" for p in PRANDTL)
        rows = [head]
        for re in RE_TAU:
            marks = " ".join(f"{'X' if _available(re, p) else '.':>6}" for p in PRANDTL)
            rows.append(f"{re:>9g} {marks}")
        return "\n".join(rows)
