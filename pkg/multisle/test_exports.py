# test_exports.py - JSON encoding, CSV output and atomic writes

import json
import math

import numpy as np
import pandas as pd

from exports import dumps_json, envelope, read_json, write_csv, write_json
from schemas import RunConfig


class TestJson:
    def test_floats_keep_seventeen_digits(self):
        text = dumps_json({"x": 0.1})
        assert '"x": 0.10000000000000001' in text
        assert json.loads(text)["x"] == 0.1

    def test_infinity_and_nan(self):
        data = json.loads(dumps_json({"a": math.inf, "b": -math.inf, "c": math.nan}))
        assert data == {"a": "inf", "b": "-inf", "c": None}

    def test_numpy_values(self):
        data = json.loads(dumps_json({"arr": np.array([1.0, 2.0]), "n": np.int64(3), "empty": []}))
        assert data == {"arr": [1.0, 2.0], "n": 3, "empty": []}

    def test_key_order_is_kept(self):
        text = dumps_json({"z": 1, "a": 2})
        assert text.index('"z"') < text.index('"a"')


class TestFiles:
    def test_write_json_creates_directories(self, tmp_path):
        path = write_json({"ok": True}, tmp_path / "deep" / "out.json")
        assert read_json(path) == {"ok": True}
        assert not [p for p in path.parent.iterdir() if p.name.endswith(".tmp")]

    def test_write_csv(self, tmp_path):
        frame = pd.DataFrame({"t": [0.0, 0.1], "w": [1.0, -2.5]})
        path = write_csv(frame, tmp_path / "d.csv")
        assert path.read_text().splitlines()[0] == "t,w"
        assert pd.read_csv(path)["w"].tolist() == [1.0, -2.5]

    def test_envelope(self):
        out = envelope({"value": 1.0}, RunConfig(kappa=3.0), "1.0.0")
        assert out["version"] == "1.0.0"
        assert out["config"]["kappa"] == 3.0
        assert out["config"]["links"] == [[0.0, "inf"]]
        assert list(out)[0] == "value"
