#
# Discussion-thread ingestion: corpus records, tokenization, vocabularies and
# the matrices A (citizens x posts), X (citizens x citizen-words) and
# Y (posts x thread-words).
#

import csv
import importlib
import json
import logging
import math
import re

from collections import Counter, namedtuple
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .sparse import SparseMatrix
from .type_hints import PathLike
from .utils import ThreadclustError, ordered_map

DEFAULT_CUTOFF = 0.001
CORPUS_FIELDS  = ('kind', 'id', 'parent', 'author', 'text')

Post    = namedtuple('Post', ('key', 'wall', 'text'))
Comment = namedtuple('Comment', ('key', 'citizen', 'post', 'text'))

Stemmer = Callable[[str], str]

# Runs of letters or digits; tokens containing a digit are dropped afterwards
TOKEN_EXP = re.compile(r'[^\W_]+')

class CorpusFormatError(ThreadclustError, ValueError):
	def __init__(self, msg: str, path: Optional[PathLike] = None, lineno: Optional[int] = None):
		where = ''
		if path is not None:
			where = f'{path}:{lineno}: ' if lineno is not None else f'{path}: '
		super().__init__(where + msg)
		self.path   = path
		self.lineno = lineno

def identity_stemmer(token: str) -> str:
	return token

def tokenize(text: str, stopwords: Set[str] = frozenset(), stemmer: Stemmer = identity_stemmer) -> List[str]:
	'''Split text into lowercased runs of Unicode letters, dropping any run that
	contains a digit, then drop stopwords and map the survivors through the
	stemmer. Original order is kept.
	'''
	res = []

	for tok in TOKEN_EXP.findall(text.lower()):
		if any(c.isdigit() for c in tok) or tok in stopwords:
			continue
		res.append(stemmer(tok))

	return res

def load_stemmer(spec: str) -> Stemmer:
	'''Load a stemmer given as "module:function" (e.g. "mypkg.stem:french").
	'''
	mod, sep, func = spec.partition(':')
	if not sep or not mod or not func:
		raise ValueError(f'stemmer must be given as MODULE:FUNCTION, got {spec!r}')

	return getattr(importlib.import_module(mod), func)

def load_stopwords(path: PathLike) -> Set[str]:
	'''Read a stopword list, one word per line, "#" starts a comment line.
	'''
	with open(path, encoding='utf-8') as f:
		lines = map(str.strip, f)
		return {l.lower() for l in lines if l and not l.startswith('#')}

class ThreadCorpus:
	'''Posts on candidate walls and the comments citizens write under them, with
	external keys internalized to dense consecutive indices (in order of first
	appearance).
	'''
	__post_tokens    = None
	__comment_tokens = None

	def __init__(self, posts: Sequence[Post], comments: Sequence[Comment],
			stopwords: Set[str] = frozenset(), stemmer: Stemmer = identity_stemmer,
			workers: int = 1):
		self.posts     = list(posts)
		self.comments  = list(comments)
		self.stopwords = frozenset(stopwords)
		self.stemmer   = stemmer
		self.workers   = workers

		self.post_keys: List[str]    = []
		self.wall_keys: List[str]    = []
		self.citizen_keys: List[str] = []
		self.post_index: Dict[str,int]    = {}
		self.wall_index: Dict[str,int]    = {}
		self.citizen_index: Dict[str,int] = {}

		post_wall = []
		for p in self.posts:
			if p.key in self.post_index:
				raise CorpusFormatError(f'duplicate post id {p.key!r}')

			self.post_index[p.key] = len(self.post_keys)
			self.post_keys.append(p.key)
			post_wall.append(_intern(p.wall, self.wall_index, self.wall_keys))

		comment_citizen, comment_post = [], []
		for c in self.comments:
			post = self.post_index.get(c.post)
			if post is None:
				raise CorpusFormatError(f'comment {c.key!r} references unknown post {c.post!r}')

			comment_post.append(post)
			comment_citizen.append(_intern(c.citizen, self.citizen_index, self.citizen_keys))

		self.post_wall       = np.array(post_wall, dtype=np.int64)
		self.comment_post    = np.array(comment_post, dtype=np.int64)
		self.comment_citizen = np.array(comment_citizen, dtype=np.int64)

	@property
	def n_posts(self) -> int:
		return len(self.post_keys)

	@property
	def n_citizens(self) -> int:
		return len(self.citizen_keys)

	@property
	def n_walls(self) -> int:
		return len(self.wall_keys)

	@property
	def post_tokens(self) -> List[List[str]]:
		if self.__post_tokens is None:
			self.__post_tokens = self.__tokenize(p.text for p in self.posts)
		return self.__post_tokens

	@property
	def comment_tokens(self) -> List[List[str]]:
		if self.__comment_tokens is None:
			self.__comment_tokens = self.__tokenize(c.text for c in self.comments)
		return self.__comment_tokens

	def __tokenize(self, texts: Iterable[str]) -> List[List[str]]:
		fn = lambda t: tokenize(t, self.stopwords, self.stemmer)
		return ordered_map(fn, texts, self.workers)

	def comments_of_citizen(self, citizen: int) -> List[str]:
		return [self.comments[i].key for i in np.flatnonzero(self.comment_citizen == citizen)]

	def comments_of_post(self, post: int) -> List[str]:
		return [self.comments[i].key for i in np.flatnonzero(self.comment_post == post)]

	def __repr__(s):
		return (f'ThreadCorpus({s.n_posts} posts on {s.n_walls} walls, '
			f'{len(s.comments)} comments by {s.n_citizens} citizens)')

def _intern(key: str, index: Dict[str,int], keys: List[str]) -> int:
	i = index.get(key)
	if i is None:
		i = index[key] = len(keys)
		keys.append(key)
	return i

class Vocabulary:
	'''Lexicographically ordered terms that appear in at least
	ceil(cutoff * n_documents) documents.
	'''
	__slots__ = ('terms', 'doc_frequency', 'cutoff', 'n_documents', 'index')

	def __init__(self, terms: Sequence[str], doc_frequency: Sequence[int],
			cutoff: float, n_documents: int):
		self.terms         = list(terms)
		self.doc_frequency = np.asarray(doc_frequency, dtype=np.int64)
		self.cutoff        = cutoff
		self.n_documents   = n_documents
		self.index         = {t: i for i, t in enumerate(self.terms)}

	def __len__(self) -> int:
		return len(self.terms)

	@property
	def min_doc_frequency(self) -> int:
		return min_doc_frequency(self.cutoff, self.n_documents)

	def __repr__(s):
		return f'Vocabulary({len(s)} terms, cutoff={s.cutoff}, docs={s.n_documents})'

def min_doc_frequency(cutoff: float, n_documents: int) -> int:
	# Guard against 0.001 * 1000 = 1.0000000000000002 style rounding
	return max(1, math.ceil(cutoff * n_documents - 1e-9))

def build_vocabulary(documents: Iterable[Sequence[str]], cutoff: float = DEFAULT_CUTOFF) -> Vocabulary:
	'''Build a vocabulary from tokenized documents, keeping terms contained in
	at least ceil(cutoff * n_documents) documents.
	'''
	if not 0 < cutoff <= 1:
		raise ValueError(f'vocabulary cutoff must be in (0, 1], got {cutoff}')

	df = Counter()
	n_docs = 0

	for doc in documents:
		df.update(set(doc))
		n_docs += 1

	threshold = min_doc_frequency(cutoff, n_docs)
	terms = sorted(t for t, n in df.items() if n >= threshold)
	logging.info('Vocabulary: %d of %d terms in >= %d of %d documents',
		len(terms), len(df), threshold, n_docs)
	return Vocabulary(terms, [df[t] for t in terms], cutoff, n_docs)

def citizen_vocabulary(corpus: ThreadCorpus, cutoff: float = DEFAULT_CUTOFF) -> Vocabulary:
	'''Citizen-words: terms contained in at least a cutoff fraction of comments.
	'''
	return build_vocabulary(corpus.comment_tokens, cutoff)

def thread_vocabulary(corpus: ThreadCorpus, cutoff: float = DEFAULT_CUTOFF) -> Vocabulary:
	'''Thread-words: terms contained in at least a cutoff fraction of all the
	individual texts in threads (posts and comments each count as a document).
	'''
	return build_vocabulary(corpus.post_tokens + corpus.comment_tokens, cutoff)

def build_adjacency(corpus: ThreadCorpus) -> SparseMatrix:
	'''A[i, j] = number of comments by citizen i on post j.
	'''
	ones = np.ones(len(corpus.comments))
	return SparseMatrix.from_coo(corpus.comment_citizen, corpus.comment_post,
		ones, corpus.n_citizens, corpus.n_posts)

def _term_incidence(token_lists: Iterable[Sequence[str]], vocab: Vocabulary) -> Tuple[np.ndarray,np.ndarray]:
	'''For each document, the distinct vocabulary terms it contains, flattened
	as (document index, term index) arrays.
	'''
	docs, terms = [], []
	index = vocab.index

	for d, toks in enumerate(token_lists):
		hits = sorted({index[t] for t in toks if t in index})
		docs.extend([d] * len(hits))
		terms.extend(hits)

	return np.array(docs, dtype=np.int64), np.array(terms, dtype=np.int64)

def build_citizen_terms(corpus: ThreadCorpus, vocab: Vocabulary) -> SparseMatrix:
	'''X[i, j] = number of comments by citizen i containing term j (each
	comment counts once per term, however many times the term occurs).
	'''
	docs, terms = _term_incidence(corpus.comment_tokens, vocab)
	rows = corpus.comment_citizen[docs] if docs.size else docs
	return SparseMatrix.from_coo(rows, terms, np.ones(terms.size),
		corpus.n_citizens, len(vocab))

def build_thread_terms(corpus: ThreadCorpus, vocab: Vocabulary) -> SparseMatrix:
	'''Y[i, j] = 1{post i contains term j} + number of comments under post i
	containing term j.
	'''
	post_docs, post_terms = _term_incidence(corpus.post_tokens, vocab)
	com_docs, com_terms = _term_incidence(corpus.comment_tokens, vocab)
	com_rows = corpus.comment_post[com_docs] if com_docs.size else com_docs

	rows  = np.concatenate((post_docs, com_rows))
	terms = np.concatenate((post_terms, com_terms))
	return SparseMatrix.from_coo(rows, terms, np.ones(terms.size),
		corpus.n_posts, len(vocab))

def _tfidf_rows(token_lists: Sequence[Sequence[str]], vocab: Vocabulary,
		idf: Dict[str,float]) -> Tuple[List[int],List[int],List[float]]:
	docs, terms, vals = [], [], []

	for d, toks in enumerate(token_lists):
		if not toks:
			continue

		length = len(toks)
		for t, n in sorted(Counter(toks).items()):
			j = vocab.index.get(t)
			if j is None:
				continue

			docs.append(d)
			terms.append(j)
			vals.append(n / length * idf[t])

	return docs, terms, vals

def tfidf_weight(corpus: ThreadCorpus, citizen_vocab: Vocabulary = None,
		thread_vocab: Vocabulary = None) -> Tuple[SparseMatrix,SparseMatrix]:
	'''TF-IDF weighted versions of X and Y. Documents are the individual posts
	and comments; the weight of term t in document d is

	    (occurrences of t in d / tokens in d) * log2(n_documents / df(t))

	The citizen matrix sums the comment-level rows of each citizen, the post
	matrix holds post-level weights.
	'''
	if citizen_vocab is None:
		citizen_vocab = citizen_vocabulary(corpus)
	if thread_vocab is None:
		thread_vocab = thread_vocabulary(corpus)

	all_docs = corpus.post_tokens + corpus.comment_tokens
	df = Counter()
	for toks in all_docs:
		df.update(set(toks))

	n_docs = len(all_docs)
	idf = {t: math.log2(n_docs / n) for t, n in df.items()}

	docs, terms, vals = _tfidf_rows(corpus.comment_tokens, citizen_vocab, idf)
	rows = corpus.comment_citizen[np.array(docs, dtype=np.int64)] if docs else []
	x_w = SparseMatrix.from_coo(rows, terms, vals, corpus.n_citizens, len(citizen_vocab))

	docs, terms, vals = _tfidf_rows(corpus.post_tokens, thread_vocab, idf)
	y_w = SparseMatrix.from_coo(docs, terms, vals, corpus.n_posts, len(thread_vocab))
	return x_w, y_w

def read_corpus(path: PathLike, **kwargs) -> ThreadCorpus:
	'''Read a corpus file. Files ending in .jsonl hold one JSON object per line,
	anything else is tab-separated with a header line; both carry the fields
	kind (post or comment), id, parent (wall for posts, post id for comments),
	author (citizen id for comments) and text. Extra keyword arguments are
	passed to ThreadCorpus.
	'''
	path = Path(path)
	posts, comments = [], []

	for lineno, rec in _iter_records(path):
		kind = rec['kind']
		if kind == 'post':
			posts.append(Post(rec['id'], rec['parent'], rec['text']))
		elif kind == 'comment':
			if not rec['author']:
				raise CorpusFormatError('comment without author', path, lineno)
			comments.append(Comment(rec['id'], rec['author'], rec['parent'], rec['text']))
		else:
			raise CorpusFormatError(f'unknown record kind {kind!r}', path, lineno)

	if not posts and not comments:
		raise CorpusFormatError('no records', path)

	logging.info('Read %d posts and %d comments from %s', len(posts), len(comments), path)
	return ThreadCorpus(posts, comments, **kwargs)

def _iter_records(path: Path) -> Iterable[Tuple[int,Dict[str,str]]]:
	with path.open(encoding='utf-8', newline='') as f:
		if path.suffix == '.jsonl':
			for lineno, line in enumerate(f, 1):
				if not line.strip():
					continue

				try:
					rec = json.loads(line)
				except json.JSONDecodeError as e:
					raise CorpusFormatError(f'invalid JSON: {e.msg}', path, lineno) from None

				if not isinstance(rec, dict) or any(k not in rec for k in CORPUS_FIELDS):
					raise CorpusFormatError(f'record must have fields {", ".join(CORPUS_FIELDS)}', path, lineno)

				yield lineno, {k: str(rec[k]) if rec[k] is not None else '' for k in CORPUS_FIELDS}
			return

		reader = csv.reader(f, delimiter='\t')
		header = next(reader, None)
		if header is None:
			return

		if tuple(header) != CORPUS_FIELDS:
			raise CorpusFormatError('expected header ' + '\\t'.join(CORPUS_FIELDS), path, 1)

		for row in reader:
			lineno = reader.line_num
			if not row:
				continue
			if len(row) != len(CORPUS_FIELDS):
				raise CorpusFormatError(f'expected {len(CORPUS_FIELDS)} fields, got {len(row)}', path, lineno)
			yield lineno, dict(zip(CORPUS_FIELDS, row))

def write_corpus(corpus: ThreadCorpus, path: PathLike):
	'''Write the corpus in the tab-separated format read by read_corpus().
	'''
	with open(path, 'w', encoding='utf-8', newline='') as f:
		w = csv.writer(f, delimiter='\t', lineterminator='\n')
		w.writerow(CORPUS_FIELDS)

		for p in corpus.posts:
			w.writerow(('post', p.key, p.wall, '', p.text))
		for c in corpus.comments:
			w.writerow(('comment', c.key, c.post, c.citizen, c.text))

def write_vocabulary(vocab: Vocabulary, path: PathLike):
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		for term, n in zip(vocab.terms, vocab.doc_frequency):
			f.write(f'{term}\t{n}\n')

def read_terms(path: PathLike) -> List[str]:
	'''Read the terms (first column) of a vocabulary file.
	'''
	with open(path, encoding='utf-8') as f:
		return [line.split('\t', 1)[0].rstrip('\n') for line in f if line.strip()]

def write_id_map(keys: Sequence[str], path: PathLike, extra: Sequence[str] = None, extra_name: str = None):
	'''Write an index -> external key table, optionally with one extra column.
	'''
	with open(path, 'w', encoding='utf-8', newline='') as f:
		w = csv.writer(f, delimiter='\t', lineterminator='\n')
		w.writerow(('index', 'key') + ((extra_name,) if extra is not None else ()))

		for i, key in enumerate(keys):
			w.writerow((i, key) + ((extra[i],) if extra is not None else ()))

def read_id_map(path: PathLike) -> Tuple[List[str],Optional[List[str]]]:
	'''Read a table written by write_id_map(), returning keys and the extra
	column (or None).
	'''
	with open(path, encoding='utf-8', newline='') as f:
		reader = csv.reader(f, delimiter='\t')
		header = next(reader)
		rows = [r for r in reader if r]

	keys = [r[1] for r in rows]
	extra = [r[2] for r in rows] if len(header) > 2 else None
	return keys, extra
