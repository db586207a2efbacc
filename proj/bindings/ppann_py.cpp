#include <pybind11/pybind11.h>
PYBIND11_MODULE(_ppann, m) { m.doc() = "stub"; }
