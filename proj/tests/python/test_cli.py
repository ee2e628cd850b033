"""CLI contract checks; the binary path arrives via GALD_CLI."""
import json
import os
import subprocess
import sys
import tempfile

CLI = os.environ["GALD_CLI"]


def run(*args, env=None, timeout=600):
    e = os.environ.copy()
    if env:
        e.update(env)
    return subprocess.run(
        [CLI, *args], capture_output=True, text=True, env=e, timeout=timeout
    )


def main():
    # exit code contract
    r = run("verify")
    assert r.returncode == 0, r.stdout + r.stderr
    assert "[PASS] dense-equivalence" in r.stdout

    r = run("verify", "--border-mode", "zero_pad_keys", "--check", "dense-equivalence")
    assert r.returncode == 0, r.stdout + r.stderr
    assert "[XFAIL]" in r.stdout

    r = run("--nosuchflag")
    assert r.returncode == 2
    assert r.stderr  # usage text on stderr

    r = run("verify", "--check", "nosuchcheck")
    assert r.returncode == 2

    # gradcheck registry
    r = run("gradcheck", "conv2d", "--dims", "1,2,5,5")
    assert r.returncode == 0, r.stdout + r.stderr
    r = run("gradcheck", "gald_forward", "--ga", "aspp", "--ld", "v2", "--dims", "1,2,4,4")
    assert r.returncode == 0, r.stdout + r.stderr
    r = run("gradcheck", "nosuchop")
    assert r.returncode == 2

    with tempfile.TemporaryDirectory() as tmp:
        # bench: rows = methods x sizes
        out = os.path.join(tmp, "bench")
        r = run(
            "bench", "--methods", "nonlocal,ldv2", "--sizes", "4,8,12,16",
            "--c-reduced", "4", "--out", out,
        )
        assert r.returncode == 0, r.stdout + r.stderr
        lines = open(os.path.join(out, "bench.csv")).read().strip().splitlines()
        assert lines[0] == "method,h,w,c_reduced,k,r,mac_count,wall_ns"
        assert len(lines) == 1 + 8
        meta = json.load(open(os.path.join(out, "bench_meta.json")))
        assert meta["seed"] == 42

        r = run("bench", "--sizes", "16,8", "--out", out)
        assert r.returncode == 2  # unsorted sizes

        # train determinism + epochs 0 + GALD_OUT_DIR fallback
        t1 = os.path.join(tmp, "t1")
        t2 = os.path.join(tmp, "t2")
        args = (
            "train", "--seed", "1", "--epochs", "1", "--samples", "8", "--batch", "4",
            "--eval-samples", "2", "--image-size", "32", "--channels", "4",
        )
        assert run(*args, "--out", t1).returncode == 0
        assert run(*args, env={"GALD_OUT_DIR": t2}).returncode == 0
        j1 = json.load(open(os.path.join(t1, "train_report.json")))
        j2 = json.load(open(os.path.join(t2, "train_report.json")))
        assert j1 == j2
        assert j1["seed"] == 1
        assert len(j1["loss_curve"]) == 2

        t3 = os.path.join(tmp, "t3")
        r = run(*args[:3], "--epochs", "0", "--samples", "8", "--batch", "4",
                "--eval-samples", "2", "--image-size", "32", "--channels", "4",
                "--out", t3)
        assert r.returncode == 0, r.stdout + r.stderr
        j3 = json.load(open(os.path.join(t3, "train_report.json")))
        assert j3["loss_curve"] == []

        # config file: flags > file > defaults
        cfg = os.path.join(tmp, "run.cfg")
        with open(cfg, "w") as f:
            f.write("seed=9\nepochs=0\nsamples=8\nbatch=4\neval-samples=2\n"
                    "image-size=32\nchannels=4\nout=%s\n" % os.path.join(tmp, "t4"))
        r = run("train", "--config", cfg)
        assert r.returncode == 0, r.stdout + r.stderr
        j4 = json.load(open(os.path.join(tmp, "t4", "train_report.json")))
        assert j4["seed"] == 9
        r = run("train", "--config", cfg, "--seed", "10")
        assert r.returncode == 0, r.stdout + r.stderr
        j5 = json.load(open(os.path.join(tmp, "t4", "train_report.json")))
        assert j5["seed"] == 10

    print("cli contract: all checks passed")


if __name__ == "__main__":
    main()
