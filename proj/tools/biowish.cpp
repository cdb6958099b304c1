#include <cstdio>

int main() {
  std::puts("biowish: placeholder");
  return 0;
}
