"""Tests for the CSV artifact store."""

import os
import sys
import tempfile
import unittest

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from libs import SCHEMA_VERSION  # noqa: E402
from libs.artifacts import ArtifactStore, CsvStore, read_summary, read_table  # noqa: E402


class TestCsvStore(unittest.TestCase):
    """Test suite for CsvStore."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, "run")

    def tearDown(self):
        self.tmp.cleanup()

    def test_table_layout(self):
        """Schema line, header, then one formatted line per row, written in chunks."""
        with CsvStore(self.out, chunk_size=2) as store:
            filename = store.write_table("road_I1", ["t", "x", "rho"], [(0.0, 0.5, 0.1)] * 5)
        with open(filename, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], f"# schema: {SCHEMA_VERSION}")
        self.assertEqual(lines[1], "t,x,rho")
        self.assertEqual(lines[2], "0,0.5,0.10000000000000001")
        self.assertEqual(len(lines), 7)

        schema, header, rows = read_table(filename)
        self.assertEqual(schema, SCHEMA_VERSION)
        self.assertEqual(header, ["t", "x", "rho"])
        self.assertEqual(float(rows[-1][2]), 0.1)

    def test_summary_required_keys(self):
        """Required residual keys are always present, nan when not computed."""
        with CsvStore(self.out) as store:
            store.write_summary({"mode": "counterexample", "tv_lower_bound": 9.5, "ok": True})
        summary = read_summary(self.out)
        self.assertEqual(summary["mode"], "counterexample")
        self.assertEqual(summary["tv_lower_bound"], "9.5")
        self.assertEqual(summary["ok"], "true")
        self.assertEqual(summary["max_junction_residual"], "nan")
        self.assertEqual(summary["mass_balance_error"], "nan")
        with open(os.path.join(self.out, "summary.txt"), "r", encoding="utf-8") as f:
            keys = [line.split("=")[0] for line in f]
        self.assertEqual(keys, sorted(keys))

    def test_missing_summary(self):
        """A directory without a run has an empty summary."""
        self.assertEqual(read_summary(self.tmp.name), {})

    def test_base_class(self):
        """The base store only defines the interface."""
        with self.assertRaises(NotImplementedError):
            ArtifactStore().write_table("x", [], [])
        with self.assertRaises(NotImplementedError):
            ArtifactStore().write_summary({})


if __name__ == "__main__":
    unittest.main()
