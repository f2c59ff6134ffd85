#ifndef GOODPKG_CORE_H
#define GOODPKG_CORE_H
#include <mpi.h>
typedef void (*GOODPKG_Logger)(const char *);
int GOODPKG_Initialize(MPI_Comm comm);
void GOODPKG_GetVersion(int *major, int *minor, int *patch);
int GOODPKG_Solve(const double *b, double *x, int n, GOODPKG_Logger log);
#endif
