#include <stdio.h>
int main(void) { printf("see docs/errors.md\n"); return 0; }
