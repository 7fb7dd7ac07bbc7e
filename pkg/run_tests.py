#!/usr/bin/env python3
"""
Script to run tests for the TrapTP simulator.
"""
import argparse
import os
import subprocess
import sys


def build_command(args: argparse.Namespace) -> list:
    cmd = [sys.executable, "-m", "pytest", "tests/"]
    markers = []
    if args.fast:
        markers.append("not slow")
    if args.unit:
        markers.append("unit")
    if args.integration:
        markers.append("integration")
    if markers:
        cmd.extend(["-m", " and ".join(markers)])
    if args.coverage:
        cmd.extend(["--cov=app", "--cov=worker", "--cov-report=term-missing", "--cov-report=html:htmlcov"])
    return cmd


def run_tests() -> int:
    """Run pytest with appropriate settings."""
    parser = argparse.ArgumentParser(description="Run the TrapTP test suite")
    parser.add_argument("--fast", action="store_true", help="Skip tests marked slow")
    parser.add_argument("--unit", action="store_true", help="Only unit tests")
    parser.add_argument("--integration", action="store_true", help="Only integration tests (loopback TCP, eager Celery)")
    parser.add_argument("--coverage", action="store_true", help="Collect coverage for app/ and worker/")
    args = parser.parse_args()

    # Tests never talk to a broker
    os.environ["TRAPTP_CELERY_EAGER"] = "true"

    cmd = build_command(args)
    print("Running tests for the TrapTP simulator...")
    print(f"Command: {' '.join(cmd)}")

    try:
        subprocess.run(cmd, check=True)
        print("\n✅ All tests passed!")
        return 0
    except subprocess.CalledProcessError as e:
        print(f"\n❌ Tests failed with exit code {e.returncode}")
        return e.returncode
    except FileNotFoundError:
        print("❌ pytest not found. Please install it with: pip install -r requirements.txt")
        return 1


if __name__ == "__main__":
    sys.exit(run_tests())
