import contextlib
import io
import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from ndecon import cli, convolution
from ndecon.convolution import Kernel
from ndecon.imageio import read_any, read_tensor, write_pgm, write_tensor


def run(*argv):
    """Run the command line and return the exit code and stdout"""
    out = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(io.StringIO()):
        code = cli.main(list(argv))
    return code, out.getvalue()


class CliTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name
        return

    def tearDown(self):
        convolution.set_num_threads(1)
        self.tmp.cleanup()
        return

    def path(self, *names):
        return os.path.join(self.dir, *names)

    def simulate(self, outdir, *extra):
        code, out = run(
            "simulate",
            "--size", "16,16",
            "--lines", "3",
            "--psf-size", "3,3",
            "--sigma", "0.5",
            "--noise-std", "0",
            "--outdir", outdir,
            *extra,
        )
        self.assertEqual(code, 0)
        return

    def test_convolve(self):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 256, size=(12, 9)).astype(float)
        write_pgm(x, self.path("x.pgm"))
        write_tensor(np.ones((1, 1)), self.path("delta.ndt"))

        code, out = run(
            "convolve",
            "--input", self.path("x.pgm"),
            "--kernel", self.path("delta.ndt"),
            "--output", self.path("out", "y.pgm"),
        )
        self.assertEqual(code, 0)
        np.testing.assert_array_equal(read_any(self.path("out", "y.pgm")), x)

        write_tensor(np.ones((5, 3)) / 15.0, self.path("box.ndt"))
        code, out = run(
            "--threads", "2",
            "convolve",
            "--input", self.path("x.pgm"),
            "--kernel", self.path("box.ndt"),
            "--output", self.path("out", "y.ndt"),
        )
        self.assertEqual(code, 0)
        self.assertEqual(read_tensor(self.path("out", "y.ndt")).shape, (16, 11))
        manifest = cli.read_manifest(self.path("out", "manifest.txt"))
        self.assertEqual(manifest["subcommand"], "convolve")
        self.assertEqual(manifest["result.shape.input"], "12,9")
        self.assertEqual(manifest["result.shape.kernel"], "5,3")
        self.assertEqual(manifest["result.shape.output"], "16,11")

    def test_convolve_errors(self):
        write_tensor(np.ones((3, 3)), self.path("x.ndt"))
        write_tensor(np.ones(3), self.path("k1.ndt"))
        write_tensor(np.ones((2, 2)), self.path("even.ndt"))
        with open(self.path("junk.ndt"), "wb") as fp:
            fp.write(b"not a tensor")

        args = ("convolve", "--input", self.path("x.ndt"), "--output", self.path("y.ndt"))
        self.assertEqual(run(*args, "--kernel", self.path("junk.ndt"))[0], 3)
        self.assertEqual(run(*args, "--kernel", self.path("missing.ndt"))[0], 3)
        self.assertEqual(run(*args, "--kernel", self.path("k1.ndt"))[0], 4)
        self.assertEqual(run(*args, "--kernel", self.path("even.ndt"))[0], 4)
        self.assertEqual(run("convolve", "--input", self.path("x.ndt"))[0], 2)
        self.assertEqual(run("transform")[0], 2)

    def test_simulate(self):
        for seed in (1, 2, 3):
            self.simulate(self.path(f"s{seed}"), "--seed", str(seed), "--noise-std", "5")
        truth = [read_tensor(self.path(f"s{s}", "truth.ndt")) for s in (1, 2, 3)]
        observed = [read_tensor(self.path(f"s{s}", "observed.ndt")) for s in (1, 2, 3)]
        for i in (1, 2):
            np.testing.assert_array_equal(truth[0], truth[i])
            self.assertFalse(np.array_equal(observed[0], observed[i]))
        self.assertEqual(observed[0].shape, (18, 18))

        manifest = cli.read_manifest(self.path("s2", "manifest.txt"))
        self.assertEqual(manifest["seed"], "2")
        self.assertEqual(manifest["flag.noise_std"], "5.0")
        self.assertTrue(os.path.exists(self.path("s2", "observed.pgm")))

    def test_presets(self):
        code, out = run("simulate", "--preset", "texture-high-noise", "--size", "40,30", "--outdir", self.path("p"))
        self.assertEqual(code, 0)
        manifest = cli.read_manifest(self.path("p", "manifest.txt"))
        self.assertEqual(manifest["flag.phantom"], "texture")
        self.assertEqual(manifest["flag.noise_std"], "20.0")
        self.assertEqual(manifest["flag.size"], "40,30")
        self.assertEqual(read_tensor(self.path("p", "observed.ndt")).shape, (44, 34))

        params = cli._simulation_params(cli.build_parser().parse_args(
            ["simulate", "--preset", "lines", "--outdir", "x"]
        ))
        self.assertEqual(params["size"], (512, 512))
        self.assertEqual(params["lines"], 9)
        self.assertEqual(params["noise_std"], 5.0)

    def test_deconv_pg(self):
        self.simulate(self.path("sim"))
        code, out = run(
            "deconv",
            "--observed", self.path("sim", "observed.ndt"),
            "--kernel", self.path("sim", "kernel.ndt"),
            "--method", "pg",
            "--max-iters", "500",
            "--tol", "0",
            "--trace-csv", self.path("pg", "trace.csv"),
            "--history", self.path("pg", "history.hdf5"),
            "--output", self.path("pg", "estimate.ndt"),
        )
        self.assertEqual(code, 0)
        manifest = cli.read_manifest(self.path("pg", "manifest.txt"))
        self.assertEqual(manifest["seed"], "0")
        initial = float(manifest["result.initial_objective"])
        final = float(manifest["result.final_objective"])
        self.assertLess(final, 1e-6 * initial)

        with open(self.path("pg", "trace.csv")) as fp:
            rows = fp.read().splitlines()[1:]
        self.assertEqual(len(rows), int(manifest["result.iterations_run"]))
        self.assertTrue(os.path.exists(self.path("pg", "history.hdf5")))
        self.assertEqual(read_tensor(self.path("pg", "estimate.ndt")).shape, (16, 16))

    def test_deconv_rl(self):
        self.simulate(self.path("sim"))
        code, out = run(
            "deconv",
            "--observed", self.path("sim", "observed.ndt"),
            "--kernel", self.path("sim", "kernel.ndt"),
            "--shape", "16,16",
            "--method", "rl",
            "--max-iters", "50",
            "--seedless",
            "--output", self.path("rl", "estimate.ndt"),
        )
        self.assertEqual(code, 0)
        estimate = read_tensor(self.path("rl", "estimate.ndt"))
        observed = read_tensor(self.path("sim", "observed.ndt"))
        self.assertAlmostEqual(np.sum(estimate) / np.sum(observed), 1.0, delta=1e-8)
        manifest = cli.read_manifest(self.path("rl", "manifest.txt"))
        self.assertEqual(manifest["seed"], "none")
        self.assertEqual(manifest["result.iterations_run"], "50")

    def test_deconv_keeps_simulation_record(self):
        self.simulate(self.path("sim"))
        simulated = cli.read_manifest(self.path("sim", "manifest.txt"))
        with self.assertLogs("ndecon.cli", level="WARNING") as logs:
            code, out = run(
                "deconv",
                "--observed", self.path("sim", "observed.ndt"),
                "--kernel", self.path("sim", "kernel.ndt"),
                "--shape", "16,16",
                "--max-iters", "5",
                "--output", self.path("sim", "estimate.ndt"),
            )
        self.assertEqual(code, 0)
        self.assertIn("replacing the simulate manifest", logs.output[0])

        manifest = cli.read_manifest(self.path("sim", "manifest.txt"))
        self.assertEqual(manifest["subcommand"], "deconv")
        self.assertEqual(manifest["seed"], simulated["seed"])
        self.assertEqual(manifest["input.manifest.subcommand"], "simulate")
        self.assertEqual(manifest["input.manifest.argv"], simulated["argv"])

        # A second run in the same directory still points at the simulation
        code, out = run(
            "deconv",
            "--observed", self.path("sim", "observed.ndt"),
            "--kernel", self.path("sim", "kernel.ndt"),
            "--shape", "16,16",
            "--method", "rl",
            "--max-iters", "5",
            "--output", self.path("sim", "rl.ndt"),
        )
        self.assertEqual(code, 0)
        manifest = cli.read_manifest(self.path("sim", "manifest.txt"))
        self.assertEqual(manifest["input.manifest.subcommand"], "simulate")
        self.assertEqual(manifest["input.manifest.argv"], simulated["argv"])

    def test_deconv_errors(self):
        self.simulate(self.path("sim"))
        args = (
            "deconv",
            "--observed", self.path("sim", "observed.ndt"),
            "--kernel", self.path("sim", "kernel.ndt"),
            "--output", self.path("e.ndt"),
        )
        self.assertEqual(run(*args, "--shape", "15,16")[0], 4)
        self.assertEqual(run(*args, "--method", "tv")[0], 2)
        self.assertEqual(run(*args, "--shape", "0,16")[0], 2)

        write_tensor(np.zeros((3, 3)), self.path("zero.ndt"))
        code, out = run(
            "deconv",
            "--observed", self.path("sim", "observed.ndt"),
            "--kernel", self.path("zero.ndt"),
            "--output", self.path("e.ndt"),
        )
        self.assertEqual(code, 5)

    def test_verify(self):
        code, out = run("verify", "--cases", "20", "--seed", "4")
        self.assertEqual(code, 0)
        for name in ("conv-matrix", "adjoint-transpose", "adjoint-identity", "pg-step"):
            self.assertIn(f"{name}: PASS", out)

        flip = convolution.flip
        with mock.patch("ndecon.convolution.flip", lambda h: Kernel(-flip(h).values)):
            code, out = run("verify", "--ndim", "2", "--cases", "10")
        self.assertEqual(code, 5)
        self.assertIn("adjoint-transpose: FAIL", out)

    def test_metrics(self):
        write_tensor(np.array([3.0, 4.0]), self.path("ref.ndt"))
        write_tensor(np.array([3.0, 3.0]), self.path("est.ndt"))
        write_tensor(np.array([3.0, 3.0, 3.0]), self.path("long.ndt"))

        code, out = run("metrics", "--reference", self.path("ref.ndt"), "--estimate", self.path("est.ndt"))
        self.assertEqual(code, 0)
        self.assertEqual(out.strip(), "13.979")

        code, out = run("metrics", "--reference", self.path("ref.ndt"), "--estimate", self.path("ref.ndt"))
        self.assertEqual(out.strip(), "inf")

        code, out = run("metrics", "--reference", self.path("ref.ndt"), "--estimate", self.path("long.ndt"))
        self.assertEqual(code, 4)

        # An observation is cropped to the reference first
        write_tensor(np.array([0.5, 3.0, 4.0, 0.5]), self.path("obs.ndt"))
        write_tensor(np.array([0.0, 1.0, 0.0]), self.path("delta.ndt"))
        code, out = run(
            "metrics",
            "--reference", self.path("ref.ndt"),
            "--estimate", self.path("obs.ndt"),
            "--kernel", self.path("delta.ndt"),
        )
        self.assertEqual(out.strip(), "inf")

    def test_matrix(self):
        write_tensor(np.array([1.0, 2.0, 3.0]), self.path("h.ndt"))
        code, out = run("matrix", "--kernel", self.path("h.ndt"), "--shape", "2", "--output", self.path("A.csv"))
        self.assertEqual(code, 0)
        A = np.loadtxt(self.path("A.csv"), delimiter=",")
        np.testing.assert_array_equal(A, [[1, 0], [2, 1], [3, 2], [0, 3]])

    def test_experiment(self):
        code, out = run(
            "experiment", "--size", "24,24", "--lines", "4", "--iters", "10", "--outdir", self.path("exp")
        )
        self.assertEqual(code, 0)
        manifest = cli.read_manifest(self.path("exp", "manifest.txt"))
        for key in ("snr.observed", "snr.pg", "snr.rl"):
            self.assertIn(f"result.{key}", manifest)
        for name in ("truth.ndt", "observed.ndt", "pg.ndt", "rl.ndt", "pg_trace.csv", "rl.pgm"):
            self.assertTrue(os.path.exists(self.path("exp", name)))
        self.assertIn("snr_db[pg]", out)

    def test_replay(self):
        self.simulate(self.path("sim"), "--noise-std", "3", "--seed", "11")
        with open(self.path("sim", "observed.ndt"), "rb") as fp:
            first = fp.read()
        os.remove(self.path("sim", "observed.ndt"))

        code, out = run("replay", "--manifest", self.path("sim", "manifest.txt"))
        self.assertEqual(code, 0)
        with open(self.path("sim", "observed.ndt"), "rb") as fp:
            self.assertEqual(fp.read(), first)

        with open(self.path("bad.txt"), "w") as fp:
            fp.write("subcommand=simulate\n")
        self.assertNotEqual(run("replay", "--manifest", self.path("bad.txt"))[0], 0)


if __name__ == "__main__":
    unittest.main()
