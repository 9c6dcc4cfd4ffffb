"""Console entry point; caps BLAS/OpenMP threads before numpy loads."""
import os
import sys


def main() -> int:
    threads = os.environ.get("QPHASE_THREADS", "0").strip()
    if not threads.isdigit():
        print(f"qphase: QPHASE_THREADS must be a nonnegative integer, got {threads!r}", file=sys.stderr)
        return 2
    if threads != "0":  # 0 leaves the libraries to pick
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = threads
    from .cli import main as cli_main
    return cli_main()


if __name__ == "__main__":
    sys.exit(main())
