import os
import tempfile

# Keep run directories and the run-log database out of the project tree
os.environ.setdefault("DSPECTRUM_DATA_DIR", tempfile.mkdtemp(prefix="dspectrum-tests-"))
