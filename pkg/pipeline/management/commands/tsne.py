from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Compute t-SNE layouts of patch and slice embeddings'
    stage = 'tsne'
    per_extractor = True

    def run_stage(self, config, options):
        return StageService.tsne(config, options.get('extractor'))
