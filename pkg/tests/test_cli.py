import contextlib
import importlib
import io
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from src.pipelines import PipelineResult

cli = importlib.import_module("src.cli")


class CliTests(unittest.TestCase):
    def run_main(self, argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = cli.main(argv)
        return code, stdout.getvalue(), stderr.getvalue()

    def test_help_exits_zero(self):
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            with self.assertRaises(SystemExit) as raised:
                cli.main(["--help"])

        self.assertEqual(raised.exception.code, 0)
        self.assertIn("usage: splitting-kit", stdout.getvalue())
        self.assertIn("--overlay FILE", stdout.getvalue())

    def test_list_scenarios(self):
        code, out, _ = self.run_main(["--list-scenarios"])

        self.assertEqual(code, 0)
        self.assertIn("quadratic_manifold", out.split())
        self.assertEqual(len(out.split()), 6)

    def test_usage_errors_exit_two(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            bad = Path(tmp_dir) / "bad.yaml"
            bad.write_text(
                "scenario:\n  name: bad\n  pipeline: sigma\nmodel:\n  id: quadratic\ntolerances:\n  oracle: -1\n",
                encoding="utf-8",
            )
            cases = {
                "missing_config": ([], "--config is required"),
                "threads": (["--config", "quadratic_manifold", "--threads", "0"], "--threads"),
                "unknown_file": (["--config", str(Path(tmp_dir) / "none.yaml")], "not found"),
                "bad_tolerance": (["--config", str(bad)], "line 7: "),
            }
            for label, (argv, message) in cases.items():
                with self.subTest(label=label):
                    code, _, err = self.run_main(argv)
                    self.assertEqual(code, 2)
                    self.assertIn(message, err)

    def test_pipeline_error_exits_one(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            with patch.object(cli, "run_pipeline", side_effect=RuntimeError("fixed point diverged")):
                code, _, err = self.run_main(["--config", "quadratic_manifold", "--out", tmp_dir])

        self.assertEqual(code, 1)
        self.assertIn("sigma pipeline failed in", err)
        self.assertIn("fixed point diverged", err)

    def test_empty_result_passes(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            with patch.object(cli, "run_pipeline", return_value=PipelineResult(pipeline="sigma")) as run:
                code, out, _ = self.run_main(["--config", "quadratic_manifold", "--out", tmp_dir, "--threads", "2"])

            self.assertTrue((Path(tmp_dir) / "summary.txt").exists())

        self.assertEqual(code, 0)
        self.assertIn("0 checks, 0 failed", out)
        self.assertEqual(run.call_args.args[1], 2)

    def test_bundled_sigma_run_is_reproducible(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            first, second = Path(tmp_dir) / "a", Path(tmp_dir) / "b"
            code_a, out, _ = self.run_main(["--config", "quadratic_manifold", "--out", str(first)])
            code_b, _, _ = self.run_main(["--config", "quadratic_manifold", "--out", str(second)])

            self.assertEqual((code_a, code_b), (0, 0), out)
            names = sorted(p.name for p in first.iterdir() if p.name != "manifest.yaml")
            self.assertIn("summary.json", names)
            self.assertEqual(names, sorted(p.name for p in second.iterdir() if p.name != "manifest.yaml"))
            for name in names:
                with self.subTest(name=name):
                    self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())


if __name__ == "__main__":
    unittest.main()
