int a = 1; /* trailing */ int b = 2;
