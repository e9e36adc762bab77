#!/usr/bin/env python3
"""
Start the aeqsim HTTP service from the project root.

  python run.py                      # settings from .env / environment
  python run.py --port 9000 --reload
  python run.py --check              # validate the species document and exit
"""
import argparse
import os
import sys

project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

import uvicorn

from app.core.config import settings
from app.core.errors import AeqsimError
from app.services.atomdata import atomdata_service


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="aeqsim HTTP service")
    parser.add_argument("--host", default=settings.HOST)
    parser.add_argument("--port", type=int, default=settings.PORT)
    parser.add_argument("--reload", action="store_true", default=settings.DEBUG)
    parser.add_argument("--check", action="store_true", help="load the species document and exit")
    return parser.parse_args(argv)


if __name__ == "__main__":
    args = parse_args()
    try:
        species = atomdata_service.get_species()
    except AeqsimError as e:
        print(f"aeqsim: cannot load {settings.AEQSIM_SPECIES_PATH}: {e}", file=sys.stderr)
        sys.exit(1)

    if args.check:
        print(f"{species.name}: {len(species.levels)} levels, {len(species.lines)} lines")
        sys.exit(0)

    uvicorn.run("app.main:app", host=args.host, port=args.port, reload=args.reload)
