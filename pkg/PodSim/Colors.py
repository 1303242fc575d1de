# RGBA colors (matplotlib accepts 4-tuples)

COL_RING1D = (0.2, 0.2, 1.0, 1.0)  # blue
COL_TORUS2D = (1.0, 0.0, 0.0, 1.0)  # red
COL_MESH2D = (1.0, 0.7, 0.7, 1.0)  # pink

COL_BASELINE = (0.6, 0.6, 0.6, 1.0)  # grey
COL_ADDITION = (0.0, 0.6, 0.0, 1.0)  # lime
COL_ALL_ON = (1.0, 1.0, 0.0, 1.0)  # yellow
COL_ABLATION = (1.0, 0.0, 1.0, 1.0)  # purple
COL_WORKERS = (0.5, 0.8, 1.0, 1.0)  # bright blue
COL_CUSTOM = (1.0, 0.0, 0.5, 1.0)  # dark red

COL_DBN_ERROR = (1.0, 0.0, 0.0, 1.0)  # red
COL_DBN_TIME = (0.0, 0.0, 1.0, 1.0)  # blue

COL_EDGE = (0.0, 0.0, 0.0, 1.0)  # black
COL_BACKGROUND = "#ffffff"

ALGORITHM_COLORS = {"ring1d": COL_RING1D, "torus2d": COL_TORUS2D, "mesh2d": COL_MESH2D}


def configColor(label):
    if label == "baseline":
        return COL_BASELINE
    if label == "all-on":
        return COL_ALL_ON
    if label.startswith("+"):
        return COL_ADDITION
    if label.startswith("-"):
        return COL_ABLATION
    if label.startswith("workers="):
        return COL_WORKERS
    return COL_CUSTOM
