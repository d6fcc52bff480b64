"""Smoke test for the platoon Python module.

    maturin develop -m crates/py/Cargo.toml --release
    python python/smoke_test.py
"""

from pathlib import Path

import platoon

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def read(name):
    return (FIXTURES / name).read_text()


def main():
    z = platoon.Zone.init(2).up().constrain(1, 0, 3)
    assert z.contains([2, 2]) and not z.contains([4, 4]) and not z.contains([1, 2])
    assert z.reset(1).includes(platoon.Zone.init(2))
    assert z.constrain(0, 1, -4).is_empty()
    print("zone:", z)

    model = platoon.Model(read("platoon.pvm"))
    r = model.check("A[] not deadlock")
    assert r.holds and r.verdict == "holds" and r.states > 0, r
    print(r)

    spatial = platoon.Model.load(str(FIXTURES / "platoon_spatial_noLC.pvm"))
    failing = [r for r in spatial.check_all(workers=2) if not r]
    assert failing and failing[0].trace, failing
    print(failing[0], "trace steps:", failing[0].trace.count("step "))

    assert platoon.Model(model.serialize()).serialize() == model.serialize()
    assert "do c[2]=1" in model.template_text("Spatial", id=2)

    try:
        platoon.Model(read("broken.pvm"))
    except ValueError as e:
        print("broken.pvm rejected:", str(e).splitlines()[0])
    else:
        raise AssertionError("broken.pvm parsed")

    s = platoon.Scenario()
    s.followers = 1
    assert all(s.spatial_properties())
    print("timed model:", s.build("timed"))

    r = platoon.check_agents([read("follower.bdi"), read("leader.bdi")], "eq1", depth=50)
    assert r.holds, r
    print(r)
    print("smoke test passed")


if __name__ == "__main__":
    main()
