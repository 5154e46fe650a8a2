import pytest

from qmt.corpus import default_lexicon

EN = "Sara buys the book from the bookshop"
FA = "Sara ketab ra az ketabforoushi mikharad"
SSB = "Sara sees Bob"


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


def random_circuit(rng, n, n_gates):
    """Seeded random bound circuit over all gate kinds."""
    import math

    from qmt.circuit import Gate, ParamCircuit, with_angles

    gates, angles = [], []
    kinds = ["RX", "RZ", "H"] + (["CRZ", "CNOT"] if n > 1 else [])
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        if kind in ("CRZ", "CNOT"):
            qs = tuple(int(q) for q in rng.choice(n, 2, replace=False))
        else:
            qs = (int(rng.integers(n)),)
        param = f"p{len(gates)}" if kind in ("RX", "RZ", "CRZ") else None
        gates.append(Gate(kind, qs, param))
        angles.append(float(rng.uniform(0, 2 * math.pi)) if param else None)
    c = ParamCircuit(n, tuple(gates), frozenset(), 0)
    return with_angles(c, angles)


def bell():
    from qmt.circuit import Gate, ParamCircuit, with_angles

    c = ParamCircuit(2, (Gate("H", (0,)), Gate("CNOT", (0, 1))), frozenset(), 0)
    return with_angles(c, (None, None))


ACCEPTANCE: dict[int, str] = {}


def record(n, ok, detail):
    """Store the one-line verdict of acceptance criterion ``n``."""
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
