#include <pybind11/pybind11.h>
PYBIND11_MODULE(vfl, m) { m.doc() = "placeholder"; }
