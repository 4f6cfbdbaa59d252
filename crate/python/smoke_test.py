"""Smoke test for the pyoppsim extension.

    cargo build -p oppsim-python --features extension-module
    cp target/debug/libpyoppsim.so python/pyoppsim.so
    python3 python/smoke_test.py
"""

import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pyoppsim  # noqa: E402


def main():
    assert set(pyoppsim.Scenario.presets()) == {"jodel", "city-events", "emergency"}

    sc = pyoppsim.Scenario.preset("jodel")
    assert sc.validate() == []
    text = sc.to_text()
    assert "base = 0.9, 0.095, 0.005" in text
    again = pyoppsim.Scenario.from_text(text)
    assert again.to_text() == text

    broken = pyoppsim.Scenario.from_text(text.replace("0:0.7,", "0:0.71,"))
    paths = [p for p, _ in broken.validate()]
    assert "messages.popularity" in paths, paths

    try:
        pyoppsim.Scenario.preset("bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset accepted")

    sc.user_count = 60
    sc.horizon_s = 3600.0
    a = pyoppsim.run(sc, seed=3)
    b = pyoppsim.run(sc, seed=3)
    assert a.events() == b.events()
    assert a.message_count > 0
    summary = json.loads(a.to_json())
    assert summary["user_count"] == 60
    assert summary["delivery_rate"] == a.delivery_rate

    assert pyoppsim.lower_bound(50) == 50.0
    assert pyoppsim.lower_bound(60, matching=3, keywords=4) == 100.0
    draws = pyoppsim.draw_reactions([0.9, 0.095, 0.005], 100.0, n=1000)
    assert set(draws) == {2}
    draws = pyoppsim.draw_reactions([0.9, 0.095, 0.005], 0.0, n=20000, seed=1)
    share = draws.count(0) / len(draws)
    assert abs(share - 0.9) < 0.01, share

    assert pyoppsim.jain_index([1.0, 1.0, 1.0]) == 1.0
    assert abs(pyoppsim.jain_index([0.0, 0.0, 0.0, 5.0]) - 0.25) < 1e-12
    assert pyoppsim.jain_index([]) is None

    print(f"pyoppsim smoke test ok: {a.message_count} messages, delivery rate {a.delivery_rate:.4f}")


if __name__ == "__main__":
    main()
