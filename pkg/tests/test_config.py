"""Tests for configuration loading, merging and overrides."""

import json
import os
import sys
import tempfile
import unittest

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from libs.config import (  # noqa: E402
    apply_overrides,
    load_scenario,
    merge_configs,
    numerics_setting,
    parse_config,
)
from libs.errors import ValidationError  # noqa: E402
from libs.utils import format_value, grouper, parse_scalar  # noqa: E402


class TestConfig(unittest.TestCase):
    """Test suite for the config layer."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_merge_nested(self):
        """Later tables win key by key; lists are replaced."""
        merged = merge_configs(
            {"numerics": {"T": 1.0, "cfl": 0.4}, "list": [1, 2]},
            None,
            {"numerics": {"T": 2.0}, "list": [3]},
        )
        self.assertEqual(merged, {"numerics": {"T": 2.0, "cfl": 0.4}, "list": [3]})

    def test_parse_config_missing_or_broken(self):
        """Runtime files are optional and broken ones are skipped."""
        self.assertEqual(parse_config(os.path.join(self.tmp.name, "nope.json")), {})
        self.assertEqual(parse_config(self.write("bad.json", "{not json")), {})
        self.assertEqual(parse_config(self.write("ok.json", '{"threads": 2}')), {"threads": 2})

    def test_load_scenario(self):
        """Scenarios must exist and hold a JSON object."""
        with self.assertRaises(ValidationError):
            load_scenario(os.path.join(self.tmp.name, "nope.json"))
        with self.assertRaises(ValidationError):
            load_scenario(self.write("bad.json", "{not json"))
        with self.assertRaises(ValidationError):
            load_scenario(self.write("list.json", "[1, 2]"))
        path = self.write("ok.json", json.dumps({"mode": "simulate"}))
        self.assertEqual(load_scenario(path), {"mode": "simulate"})

    def test_overrides(self):
        """Dotted keys create tables and values are parsed as JSON."""
        base = {"numerics": {"T": 1.0}}
        result = apply_overrides(base, ["numerics.T=2.5", "counterexample.n_blocks=4", "mode=stability"])
        self.assertEqual(result["numerics"]["T"], 2.5)
        self.assertEqual(result["counterexample"], {"n_blocks": 4})
        self.assertEqual(result["mode"], "stability")
        self.assertEqual(base["numerics"]["T"], 1.0)
        with self.assertRaises(ValidationError):
            apply_overrides(base, ["numerics.T"])

    def test_numerics_precedence(self):
        """Scenario, then runtime, then the built-in default."""
        scenario = {"numerics": {"cfl": 0.3}}
        runtime = {"numerics.cfl": 0.4, "numerics.vacuum_rule": "boundary"}
        self.assertEqual(numerics_setting(scenario, runtime, "cfl"), 0.3)
        self.assertEqual(numerics_setting({}, runtime, "cfl"), 0.4)
        self.assertEqual(numerics_setting({}, runtime, "vacuum_rule"), "boundary")
        self.assertEqual(numerics_setting({}, None, "demand_tolerance"), 1e-10)


class TestUtils(unittest.TestCase):
    """Test suite for the helpers in libs.utils."""

    def test_grouper(self):
        """The last chunk is short, never padded."""
        self.assertEqual(list(grouper(range(5), 2)), [[0, 1], [2, 3], [4]])

    def test_format_value(self):
        """Doubles use 17 significant digits and non-finite values have fixed spellings."""
        self.assertEqual(format_value(0.1), "0.10000000000000001")
        self.assertEqual(format_value(float("nan")), "nan")
        self.assertEqual(format_value(None), "nan")
        self.assertEqual(format_value(float("-inf")), "-inf")
        self.assertEqual(format_value(True), "true")
        self.assertEqual(format_value(3), "3")
        self.assertEqual(format_value("P1"), "P1")

    def test_parse_scalar(self):
        """JSON when possible, the raw text otherwise."""
        self.assertEqual(parse_scalar("2"), 2)
        self.assertEqual(parse_scalar("[1, 2]"), [1, 2])
        self.assertEqual(parse_scalar("upwind"), "upwind")


if __name__ == "__main__":
    unittest.main()
