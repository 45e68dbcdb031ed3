VERSION = '0.1'
VERSION_COPY = f'''\
Copyright (C) 2024 The threadclust authors
Licensed under the GNU General Public License v3.0
'''
VERSION_HELP = f'''\
threadclust version {VERSION}
{VERSION_COPY}\
'''

if __name__ == '__main__':
	print(VERSION)
