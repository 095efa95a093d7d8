s = 'it\'s # fine'  # real
