"""Reference Spearman matrices for the diversity study, variables in study order."""

RHO_3 = [
    [1.000, -0.513, 0.583, 0.246, 0.582, -0.565, -0.568, -0.588],
    [-0.513, 1.000, -0.806, -0.729, -0.938, 0.965, 0.965, 0.917],
    [0.583, -0.806, 1.000, 0.226, 0.952, -0.918, -0.930, -0.967],
    [0.246, -0.729, 0.226, 1.000, 0.485, -0.564, -0.549, -0.436],
    [0.582, -0.938, 0.952, 0.485, 1.000, -0.994, -0.993, -0.998],
    [-0.565, 0.965, -0.918, -0.564, -0.994, 1.000, 0.997, 0.986],
    [-0.568, 0.965, -0.930, -0.549, -0.993, 0.997, 1.000, 0.986],
    [-0.588, 0.917, -0.967, -0.436, -0.998, 0.986, 0.986, 1.000],
]

RHO_6 = [
    [1.000, -0.643, 0.728, 0.462, 0.751, -0.724, -0.739, -0.762],
    [-0.643, 1.000, -0.683, -0.825, -0.910, 0.952, 0.925, 0.876],
    [0.728, -0.683, 1.000, 0.386, 0.882, -0.820, -0.856, -0.918],
    [0.462, -0.825, 0.386, 1.000, 0.688, -0.756, -0.721, -0.636],
    [0.751, -0.910, 0.882, 0.688, 1.000, -0.990, -0.995, -0.995],
    [-0.724, 0.952, -0.820, -0.756, -0.990, 1.000, 0.993, 0.974],
    [-0.739, 0.925, -0.856, -0.721, -0.995, 0.993, 1.000, 0.985],
    [-0.762, 0.876, -0.918, -0.636, -0.995, 0.974, 0.985, 1.000],
]

RHO_12 = [
    [1.000, -0.730, 0.820, 0.612, 0.856, -0.829, -0.850, -0.868],
    [-0.730, 1.000, -0.690, -0.787, -0.902, 0.944, 0.900, 0.871],
    [0.820, -0.690, 1.000, 0.532, 0.868, -0.815, -0.853, -0.902],
    [0.612, -0.787, 0.532, 1.000, 0.772, -0.810, -0.788, -0.737],
    [0.856, -0.902, 0.868, 0.772, 1.000, -0.991, -0.998, -0.996],
    [-0.829, 0.944, -0.815, -0.810, -0.991, 1.000, 0.990, 0.976],
    [-0.850, 0.900, -0.853, -0.788, -0.998, 0.990, 1.000, 0.992],
    [-0.868, 0.871, -0.902, -0.737, -0.996, 0.976, 0.992, 1.000],
]

REFERENCE = {3: RHO_3, 6: RHO_6, 12: RHO_12}
