#include <vector>
// FIXME: hack around the solver
void f() {
  int n = 0; // count
}
