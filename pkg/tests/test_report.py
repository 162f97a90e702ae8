import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
import yaml

from src.pipelines import PipelineResult, Table
from src.report import emit_report, summary_text, write_table
from src.scenario import Scenario


def make_scenario(tables: bool = True) -> Scenario:
    return Scenario.from_dict(
        {
            "scenario": {"name": "report_case", "pipeline": "sigma"},
            "model": {"id": "quadratic"},
            "output": {"tables": tables},
        }
    )


def make_result() -> PipelineResult:
    result = PipelineResult(pipeline="sigma")
    result.ledger.update({"gap_threshold": 3.0 + 2.0 * np.sqrt(2.0), "kappa_minus": 0.1, "delta": 0.9})
    result.ledger["delta_hat"] = float("-inf")
    result.checks.add("fixed_point", 1e-12, 1e-10)
    result.checks.add("rate", 0.5, 1.0, sense="ge")
    result.tables["sigma"] = Table(["t", "xi", "sigma"], np.array([[0.0, 0.1, 1.0 / 3.0], [1.0, -0.1, 2e-3]]))
    result.texts["sigma.graph"] = "orientation = sigma\n"
    result.values["iterations"] = np.int64(12)
    result.notes.append("limit taken from the two-compartment model")
    return result


class ReportTests(unittest.TestCase):
    def test_table_keeps_full_precision(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            path = Path(tmp_dir) / "t.csv"
            write_table(path, ["a", "b"], np.array([1.0 / 3.0, 2.0]))
            lines = path.read_text(encoding="utf-8").splitlines()

        self.assertEqual(lines[0], "a,b")
        self.assertEqual(float(lines[1].split(",")[0]), 1.0 / 3.0)
        self.assertEqual(lines[1], "0.33333333333333331,2")

    def test_summary_lists_ledger_and_failures(self):
        text = summary_text(make_scenario(), make_result())

        self.assertIn("status = fail", text)
        self.assertIn("failed = 1", text)
        self.assertIn("[ledger]", text)
        for key in ("gap_threshold", "kappa_minus", "delta", "delta_hat"):
            self.assertIn(f"{key} = ", text)
        self.assertIn("FAIL rate: measured = 0.5 >= bound = 1", text)
        self.assertIn("PASS fixed_point", text)
        self.assertTrue(text.endswith("[notes]\nlimit taken from the two-compartment model\n"))

    def test_emit_report_writes_every_artifact(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            out = Path(tmp_dir) / "nested" / "run"
            written = emit_report(make_scenario(), make_result(), out)

            self.assertEqual(
                [p.name for p in written],
                ["manifest.yaml", "sigma.csv", "sigma.graph", "summary.txt", "summary.json"],
            )
            payload = json.loads((out / "summary.json").read_text(encoding="utf-8"))
            manifest = yaml.safe_load((out / "manifest.yaml").read_text(encoding="utf-8"))

        self.assertFalse(payload["passed"])
        self.assertEqual(payload["ledger"]["delta_hat"], "-inf")
        self.assertEqual(payload["values"]["iterations"], 12)
        self.assertEqual(payload["notes"], ["limit taken from the two-compartment model"])
        self.assertEqual(payload["tables"], ["sigma.csv"])
        self.assertEqual(len(payload["checks"]), 2)
        self.assertEqual(manifest["scenario"]["scenario"]["name"], "report_case")

    def test_tables_can_be_switched_off(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            written = emit_report(make_scenario(tables=False), make_result(), tmp_dir)
            payload = json.loads((Path(tmp_dir) / "summary.json").read_text(encoding="utf-8"))

        self.assertNotIn("sigma.csv", [p.name for p in written])
        self.assertEqual(payload["tables"], [])

    def test_unwritable_directory_is_a_runtime_error(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            blocker = Path(tmp_dir) / "file"
            blocker.write_text("", encoding="utf-8")

            with self.assertRaisesRegex(RuntimeError, "cannot create output directory"):
                emit_report(make_scenario(), make_result(), blocker / "out")


if __name__ == "__main__":
    unittest.main()
