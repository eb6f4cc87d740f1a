from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Run every stage: data, pretext training, embeddings, SVMs, evaluation and t-SNE'
    stage = 'run_all'

    def run_stage(self, config, options):
        table = StageService.run_all(config)
        self.stdout.write('\n' + table.read_text(encoding='utf-8'))
        return table
