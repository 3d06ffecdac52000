"""Parameter schedules (m_j), (n_j): the two paper variants plus toy overrides.

Paper variant A:  m_1 = 2, m_{j+1} = m_j^5;  n_1 = 4, n_{j+1} = (5 n_j)^{s_j}
with s_j = log2(m_{j+1}^3) (an exact integer: every m_j is a power of two).

Paper variant S:  m_1 = 2, m_{j+1} = m_j^{m_j};  n_1 = 1, n_{j+1} = 2^{2 m_{j+1}} n_j.

Both explode past desk scale almost immediately; j_max is guarded so the
integers stay representable.  Toy schedules carry their own small values and
every downstream result records which schedule produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

PAPER_A = "PAPER_A"
PAPER_S = "PAPER_S"
TOY = "TOY"

# Bigger j_max would require integers whose binary representation does not fit
# in memory (e.g. PAPER_S n_4 = 2^(2*2^2048) * n_3).
_JMAX_GUARD = {PAPER_A: 4, PAPER_S: 3}


@dataclass(frozen=True)
class ParamSchedule:
    """The sequences (m_j), (n_j), 1-indexed, with optional derived s_j."""

    variant: str
    m: tuple[int, ...]
    n: tuple[int, ...]
    s: tuple[int, ...] | None = None
    label: str = field(default="", compare=False)

    def j_max(self) -> int:
        return len(self.m)

    def has_index(self, j: int) -> bool:
        return 1 <= j <= len(self.m)

    def m_at(self, j: int) -> int:
        if not self.has_index(j):
            raise ScheduleIndexError(f"m_{j} not in schedule of length {len(self.m)}")
        return self.m[j - 1]

    def n_at(self, j: int) -> int:
        if not self.has_index(j):
            raise ScheduleIndexError(f"n_{j} not in schedule of length {len(self.n)}")
        return self.n[j - 1]

    def describe(self) -> str:
        return self.label or self.variant


class ScheduleIndexError(KeyError):
    pass


def _exact_log2(n: int) -> int:
    e = n.bit_length() - 1
    if n <= 0 or (1 << e) != n:
        raise ValueError(f"{n} is not a power of two")
    return e


def paper_schedule(variant: str, j_max: int) -> ParamSchedule:
    """Exact big-integer evaluation of the paper recurrences up to j_max."""
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    guard = _JMAX_GUARD.get(variant)
    if guard is None:
        raise ValueError(f"unknown paper variant {variant!r}")
    if j_max > guard:
        raise ValueError(
            f"{variant} schedule beyond j_max={guard} is not representable "
            "in memory; use a TOY schedule for desk-scale work"
        )
    if variant == PAPER_A:
        m = [2]
        n = [4]
        s: list[int] = []
        for _ in range(1, j_max):
            m_next = m[-1] ** 5
            s_j = _exact_log2(m_next**3)
            n.append((5 * n[-1]) ** s_j)
            m.append(m_next)
            s.append(s_j)
        return ParamSchedule(PAPER_A, tuple(m), tuple(n), tuple(s))
    m = [2]
    n = [1]
    for _ in range(1, j_max):
        m_next = m[-1] ** m[-1]
        n.append(2 ** (2 * m_next) * n[-1])
        m.append(m_next)
    return ParamSchedule(PAPER_S, tuple(m), tuple(n))


def toy_schedule(m: list[int] | tuple[int, ...], n: list[int] | tuple[int, ...], label: str = "") -> ParamSchedule:
    return ParamSchedule(TOY, tuple(int(v) for v in m), tuple(int(v) for v in n), label=label)


def validate_schedule(sched: ParamSchedule) -> list[str]:
    """Empty list iff all variant-applicable constraints hold."""
    violations: list[str] = []
    if len(sched.m) != len(sched.n):
        violations.append("m and n have different lengths")
    for j, mj in enumerate(sched.m, start=1):
        if mj < 2:
            violations.append(f"m_{j} < 2")
    for j, nj in enumerate(sched.n, start=1):
        if nj < 1:
            violations.append(f"n_{j} < 1")
    for j in range(1, len(sched.m)):
        if sched.m[j] <= sched.m[j - 1]:
            violations.append(f"m not increasing at j={j + 1}")
    for j in range(1, len(sched.n)):
        if sched.n[j] <= sched.n[j - 1]:
            violations.append(f"n not increasing at j={j + 1}")
    if sched.variant == PAPER_A:
        for j, mj in enumerate(sched.m, start=1):
            if mj % 2:
                violations.append(f"m_{j} odd")
        for j, nj in enumerate(sched.n, start=1):
            if nj % 2:
                violations.append(f"n_{j} odd")
        # (n_{2j} / m_{2j})_j must increase
        ratios = [
            (sched.n[k - 1], sched.m[k - 1])
            for k in range(2, len(sched.m) + 1, 2)
        ]
        for i in range(1, len(ratios)):
            n1, m1 = ratios[i - 1]
            n2, m2 = ratios[i]
            if n2 * m1 <= n1 * m2:
                violations.append(f"n_2j/m_2j not increasing at pair {i + 1}")
    return violations


def schedule_to_json(sched: ParamSchedule) -> str:
    payload = {
        "variant": sched.variant,
        "m": [str(v) for v in sched.m],
        "n": [str(v) for v in sched.n],
    }
    if sched.s is not None:
        payload["s"] = [str(v) for v in sched.s]
    if sched.label:
        payload["label"] = sched.label
    return json.dumps(payload, sort_keys=True)


def schedule_from_json(text: str) -> ParamSchedule:
    data = json.loads(text)
    variant = data.get("variant", TOY)
    m = tuple(int(v) for v in data["m"])
    n = tuple(int(v) for v in data["n"])
    s = tuple(int(v) for v in data["s"]) if "s" in data else None
    return ParamSchedule(variant, m, n, s, label=data.get("label", ""))
