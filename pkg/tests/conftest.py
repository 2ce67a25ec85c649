from __future__ import annotations

import random
from pathlib import Path

import pytest

from hlsx.frontend import SourceUnit, parse, parse_design
from hlsx.hierarchy import ConnectivityRow, InRef, OutRef, TopRef, build_connectivity, flatten
from hlsx.hls_extractor import compute

FIXTURES = Path(__file__).parent / "fixtures"
HIERARCHY_UNITS = ["global_entity", "counter", "e2", "e3", "e4"]
MODULE_M_UNITS = ["counter_a", "controller_b", "m"]


def load_design(folder: str, names):
    return parse_design([SourceUnit.from_path(FIXTURES / folder / f"{n}.vhd") for n in names])


def norm(text) -> str:
    """Compare operation and condition text the way the printed tables spell it."""
    if text is None:
        return None
    return str(text).replace(" ", "").replace('"', "").replace("'", "").replace(">=", "≥").lower()


def random_hierarchy(seed: int) -> list:
    """A random tree of instances with consistent parent-relative wiring."""
    rng = random.Random(seed)
    rows: list = []
    next_id = [1]
    top_in = [f"I{k}" for k in range(1, rng.randint(2, 4))]
    top_out = [f"O{k}" for k in range(1, rng.randint(2, 3))]

    def spawn(parent, level, p_in, p_out_refs):
        n = rng.randint(2, 3)
        ids = list(range(next_id[0], next_id[0] + n))
        next_id[0] += n
        shapes = {i: (rng.randint(1, 3), rng.randint(1, 2)) for i in ids}
        kids_of = {i: level < 3 and rng.random() < 0.4 for i in ids}
        # each parent output is driven by exactly one child output
        slots = [(i, m) for i in ids for m in range(1, shapes[i][1] + 1)]
        rng.shuffle(slots)
        out_map = {slots[j]: ref for j, ref in enumerate(p_out_refs[: len(slots)])}
        made = []
        for i in ids:
            n_in, n_out = shapes[i]
            ins = []
            for k in range(1, n_in + 1):
                choices = list(p_in) + [OutRef(m, j) for j in ids if j != i for m in range(1, shapes[j][1] + 1)]
                ins.append((f"In{k}", rng.choice(choices)))
            outs = [(f"Out{m}", out_map[(i, m)]) for m in range(1, n_out + 1) if (i, m) in out_map]
            made.append(
                ConnectivityRow(
                    i, f"M{i}", level, parent, tuple(f"a{k}" for k in range(n_in)), tuple(f"b{m}" for m in range(n_out)),
                    tuple(ins), tuple(outs), leaf=not kids_of[i],
                )
            )
        rows.extend(made)
        for r in made:
            if not r.leaf:
                spawn(r.inst, level + 1, [InRef(k, r.inst) for k in range(1, len(r.inputs) + 1)],
                      [OutRef(m, r.inst) for m in range(1, len(r.outputs) + 1)])

    spawn(None, 1, [TopRef(n) for n in top_in], [TopRef(n) for n in top_out])
    return rows


@pytest.fixture(scope="session")
def counter_tables():
    return parse(SourceUnit.from_path(FIXTURES / "counter" / "counter.vhd"))


@pytest.fixture(scope="session")
def counter_result(counter_tables):
    return compute(counter_tables)


@pytest.fixture(scope="session")
def evenodd_tables():
    return parse(SourceUnit.from_path(FIXTURES / "evenodd" / "evenodd.vhd"), allow_slash_comments=True)


@pytest.fixture(scope="session")
def hierarchy_design():
    return load_design("hierarchy", HIERARCHY_UNITS)


@pytest.fixture(scope="session")
def hierarchy_conn(hierarchy_design):
    return build_connectivity(hierarchy_design, "global_entity")


@pytest.fixture(scope="session")
def module_m_design():
    return load_design("module_m", MODULE_M_UNITS)


@pytest.fixture(scope="session")
def module_m_flat(module_m_design):
    return flatten(build_connectivity(module_m_design, "m"))
