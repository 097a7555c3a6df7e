import importlib.metadata
import unittest


class TestMetadata(unittest.TestCase):
    def setUp(self):
        self.metadata = importlib.metadata.metadata('hullmix')

    def test_project_identity(self):
        assert self.metadata['Name'] == 'hullmix'
        assert self.metadata['Author'] == 'hullmix developers'
        assert 'jaraco' not in (self.metadata.get('Author-email') or '')

    def test_home_page(self):
        urls = [self.metadata.get('Home-page') or '']
        urls += self.metadata.get_all('Project-URL') or []
        assert any('github.com/hullmix/hullmix' in url for url in urls)
