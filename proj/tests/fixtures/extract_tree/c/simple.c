int x; // TODO fix
