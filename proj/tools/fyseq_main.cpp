#include <cstdio>

int main() {
  std::puts("fyseq: not wired yet");
  return 0;
}
