import os

from dotenv import load_dotenv

load_dotenv()

APP_NAME = os.getenv("APP_NAME", "heisenberg-psido")

LOG_CONFIG = os.getenv("HEIS_LOG_CONFIG", "logging.ini")
OUTPUT_DIR = os.getenv("HEIS_OUTPUT_DIR", "runs")


# desk-scale defaults
GROUP_DIM = int(os.getenv("HEIS_GROUP_DIM", "1"))
HALF_WIDTH = float(os.getenv("HEIS_HALF_WIDTH", "8"))
POINTS = int(os.getenv("HEIS_POINTS", "256"))
HERMITE_DIM = int(os.getenv("HEIS_HERMITE_DIM", "32"))

LAMBDA_MIN = float(os.getenv("HEIS_LAMBDA_MIN", str(1 / 16)))
LAMBDA_MAX = float(os.getenv("HEIS_LAMBDA_MAX", "16"))
LAMBDA_NODES = int(os.getenv("HEIS_LAMBDA_NODES", "64"))

# box on which functions on the group are sampled
GROUP_HALF_WIDTH = 8.0
GROUP_POINTS = 96
CENTRE_HALF_WIDTH = 6.0
CENTRE_POINTS = 64

# u-box of the representation space; wider than HALF_WIDTH so that h_31 fits
QUANT_HALF_WIDTH = float(os.getenv("HEIS_QUANT_HALF_WIDTH", "10"))

# coarse output grid of the quantization
OUTPUT_HALF_WIDTH = 4.0
OUTPUT_CENTRE_HALF_WIDTH = 3.0
OUTPUT_POINTS = 16

# frequency box for the Weyl-side quantization
FREQUENCY_HALF_WIDTH = 4.0
FREQUENCY_POINTS = 64


# finite differences within this multiple of their roundoff estimate count as zero
ROUNDOFF_FACTOR = 1e3


# tolerances
TOLERANCES = {
    "plancherel_spread": 1e-2,
    "truncation": 0.10,
    "tail": 1e-2,
    "refinement_growth": 0.10,
    "support_loss": 1e-3,
    "smoothness": 1e-3,
    "injectivity": 1e-12,
    "identity": 1e-5,
    "convergence": 1e-3,
    "adjoint": 1e-2,
    "parametrix": 0.2,
    "parametrix_floor": 1e-6,
    "margin": 1e-3,
}
