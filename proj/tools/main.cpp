#include <cstdio>

int main() {
  std::puts("loopwbc 0.1.0");
  return 0;
}
