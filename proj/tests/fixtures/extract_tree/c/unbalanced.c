int z;
/* never closed
int w;
