"""Smoke test for the compiled extension. Run after installing it."""

from pathlib import Path

import provcause

FIXTURES = Path(__file__).resolve().parents[1] / "crates" / "core" / "fixtures"


def read(name):
    return (FIXTURES / name).read_text()


def main():
    cake, ops = read("cake.json"), read("cake-ops.json")
    values = provcause.evaluate(cake, ops)
    assert values["cake"] == "1", values
    inputs = dict(water="0", sugar="1", eggs="1", flour="1", butter="1", pan="1")
    assert provcause.evaluate(cake, ops, inputs)["cake"] == "0"

    triples = provcause.infer(cake)
    assert ("wasDerivedFrom+", "cake", "water") in triples

    rows, spurious, sound = provcause.audit(read("constgate.json"), read("constgate-ops.json"))
    assert spurious >= 1 and rows[0]["status"] == "spurious", rows

    verdict = provcause.is_actual_cause(read("cake-model.json"), {"Water": "1"}, ("Cake", "1"))
    assert verdict["actual"] is True, verdict

    power = read("power.slp")
    assert provcause.run_program(power, ["2", "1", "2"]) == "2"
    assert provcause.check_approximation(power)["pass"] is True
    incr = read("incr.slp")
    v = provcause.check_approximation(incr, semantics="trivial", domain="mod:5")
    assert v["pass"] is False and v["counterexample"]["variable"] == "z", v

    try:
        provcause.run_program("input x; return y", ["1"])
    except ValueError as e:
        assert "y" in str(e)
    else:
        raise AssertionError("bad program accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
