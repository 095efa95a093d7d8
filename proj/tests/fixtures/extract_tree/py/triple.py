x = '''
# inside
'''
# outside
