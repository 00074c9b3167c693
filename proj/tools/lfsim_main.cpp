#include <cstdio>
int main() { std::puts("lfsim"); return 0; }
