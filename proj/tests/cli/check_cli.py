"""Contract checks for the mks command line tool.

Usage: check_cli.py MKS_BINARY CONFIG_DIR SCHEMA_DIR CASE
"""

import csv
import json
import pathlib
import subprocess
import sys
import tempfile


def run(binary, *args):
    return subprocess.run([binary, *args], capture_output=True, text=True, timeout=600)


def expect(condition, message):
    if not condition:
        raise AssertionError(message)


def case_scf(binary, configs, schemas, work):
    p = run(binary, "scf", "--config", str(configs / "si1d.cfg"), "--out", str(work))
    expect(p.returncode == 0, f"scf exit {p.returncode}: {p.stderr}")
    expect((work / "checkpoint.mks").stat().st_size > 0, "checkpoint missing")
    with open(work / "scf_log.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    expect(rows and list(rows[0]) == ["iteration", "F", "drho", "mu"], "scf log header")
    expect(float(rows[-1]["drho"]) <= 1e-10, "last logged density change above tolerance")


def case_sweep(binary, configs, schemas, work):
    p = run(binary, "sweep", "--config", str(configs / "si1d.cfg"), "--cutoffs", "10,15,20,25,30",
            "--reference", "80", "--out", str(work))
    expect(p.returncode == 0, f"sweep exit {p.returncode}: {p.stderr}")
    summary = json.loads((work / "sweep_summary.json").read_text())
    header = ["ec", "f_total", "f_err", "rho_l2_err", "gamma_s11_err", "proj_err", "ratio", "scf_iters", "wall_s"]
    for t in summary["temperatures"]:
        with open(work / t["csv"], newline="") as f:
            reader = csv.reader(f)
            expect(next(reader) == header, f"{t['csv']} header")
            rows = list(reader)
        expect(len(rows) == 5, f"{t['csv']} has {len(rows)} rows")
        expect([float(r[0]) for r in rows] == [10, 15, 20, 25, 30], "rows ordered by cutoff")

    import jsonschema

    schema = json.loads((schemas / "sweep_summary.schema.json").read_text())
    jsonschema.validate(summary, schema)


def case_json(binary, configs, schemas, work):
    p = run(binary, "audit", "--config", str(configs / "rhf1d.cfg"), "--json", "--out", str(work))
    expect(p.returncode == 0, f"audit exit {p.returncode}: {p.stderr}")
    mirrored = json.loads(p.stdout)
    expect(mirrored == json.loads((work / "audit.json").read_text()), "--json output differs from audit.json")


def case_missing_key(binary, configs, schemas, work):
    text = (configs / "si1d.cfg").read_text().splitlines()
    cfg = work / "missing.cfg"
    cfg.write_text("\n".join(line for line in text if not line.startswith("electrons")) + "\n")
    p = run(binary, "scf", "--config", str(cfg), "--out", str(work))
    expect(p.returncode == 2, f"missing key exit {p.returncode}")
    expect("system.electrons" in p.stderr, f"diagnostic lacks the key name: {p.stderr!r}")


def case_unconverged(binary, configs, schemas, work):
    cfg = work / "capped.cfg"
    cfg.write_text((configs / "si1d.cfg").read_text() + "max_iterations = 2\n")
    p = run(binary, "scf", "--config", str(cfg), "--out", str(work))
    expect(p.returncode == 1, f"unconverged exit {p.returncode}")


def case_usage(binary, configs, schemas, work):
    expect(run(binary).returncode == 2, "no subcommand")
    expect(run(binary, "scf").returncode == 2, "missing --config")
    expect(run(binary, "scf", "--config", str(work / "absent.cfg")).returncode == 2, "absent config file")
    expect(run(binary, "sweep", "--config", str(configs / "si1d.cfg"), "--cutoffs", "10,x").returncode == 2,
           "malformed cutoff list")
    expect(run(binary, "--help").returncode == 0, "help")


CASES = {name[len("case_"):]: fn for name, fn in globals().items() if name.startswith("case_")}


def main():
    binary, configs, schemas, case = sys.argv[1:5]
    with tempfile.TemporaryDirectory() as work:
        CASES[case](binary, pathlib.Path(configs), pathlib.Path(schemas), pathlib.Path(work))
    print(f"cli.{case}: ok")


if __name__ == "__main__":
    main()
