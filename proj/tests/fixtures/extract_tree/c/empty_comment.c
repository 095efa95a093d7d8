//
/**/
int k;
