"""The experiment harness: flat key = value configs, CSV tables.

Runs the four subcommands on the configs in demos/configs and lists what was
written.  The same runs from a shell:

    python3 -m polybergman run demos/configs/gaussian.cfg
    python3 -m polybergman table demos/configs/hoelder.cfg
    python3 -m polybergman --seed 3 sample demos/configs/gaussian.cfg
    python3 -m polybergman envelope demos/configs/annulus.cfg
"""

import os
import shutil
import tempfile

from polybergman.cli import main

here = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")
work = tempfile.mkdtemp(prefix="polybergman-demo-")
for name in os.listdir(here):
    shutil.copy(os.path.join(here, name), work)

main(["run", os.path.join(work, "gaussian.cfg")])
main(["table", os.path.join(work, "hoelder.cfg")])
main(["--seed", "3", "sample", os.path.join(work, "gaussian.cfg")])
main(["envelope", os.path.join(work, "annulus.cfg")])
main(["run", os.path.join(work, "polytope.cfg")])
for root, _, files in sorted(os.walk(work)):
    for f in sorted(files):
        if f.endswith(".csv"):
            print(os.path.relpath(os.path.join(root, f), work))
print(open(os.path.join(work, "out-gaussian", "summary.csv")).read())
