from .model_base import BlockModel, CalibrationError, Instance, ModelSpecError
from .ncscbm import NCScBM, BlockModelSpec, planted_spec, sample_ncscbm
from .dcsbm import DCSBMDocs, sample_dcsbm_docs
from .population import SizeGuardError, population_similarity
from .metrics import misclustering_rate

# NOTE: keyword arguments are passed through as given, the model constructors
# validate them.
SUPPORTED_MODELS = {
	'ncscbm': lambda **kw: NCScBM(**kw),
	'dcsbm' : lambda **kw: DCSBMDocs(**kw),
}

MODEL_ALIASES = (
	# name     alias
	('ncscbm', 'cosbm'    ),
	('ncscbm', 'planted'  ),
	('dcsbm' , 'documents'),
	('dcsbm' , 'docs'     ),
)

SUPPORTED_MODELS.update({alias: SUPPORTED_MODELS[name] for name, alias in MODEL_ALIASES})

SUPPORTED_MODELS_HELP = '''\
Supported simulation models (values are case-insensitive):

    Value    Aliases           Nodes                 Parameters (--param KEY=VALUE)
    ------------------------------------------------------------------------------------
    ncscbm   cosbm, planted    citizens x posts      n_c, n_p, k, p_in, p_out,
                                                     terms_per_block, text_signal, noise
    dcsbm    documents, docs   documents x documents n_docs, n_words, sig_g, sig_t,
                                                     theta (ones|powerlaw), exponent

    ncscbm: planted partition with k blocks on both sides, edge probability p_in
            within blocks and p_out across, each block owning terms_per_block
            terms with mean text_signal plus Gaussian noise.
    dcsbm:  two blocks of documents and words, 20 links and 200 words per
            document in expectation, block information set by sig_g and sig_t.
'''

def model_from_name(name: str, **params) -> BlockModel:
	'''Instantiate the right BlockModel subclass given a human-friendly name
	(--model). The name should be already validated.
	'''
	return SUPPORTED_MODELS[name.lower()](**params)
