import pytest

import pricing_api
from exceptions import NumericalError
from main import app


@pytest.fixture
def client():
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client


def test_index_and_health(client):
    assert client.get('/').get_json()['status'] == 'online'
    assert client.get('/health').get_json() == {'status': 'healthy'}


def test_examples_listing(client):
    data = client.get('/api/examples').get_json()
    assert data['success']
    assert [entry['id'] for entry in data['examples']] == ['1', '2', '3', 'call']
    assert data['examples'][1]['sigma'] == 0.5


def test_price_example_two(client):
    response = client.post('/api/price', json={
        'example': '2', 'alpha0': 0.5, 'N': 8, 'M': 8, 'spots': [1.5, 2.0], 'time': 0.5,
    })
    assert response.status_code == 200
    data = response.get_json()
    assert [p['spot'] for p in data['prices']] == [1.5, 2.0]
    assert all(abs(p['value']) < 1.0 for p in data['prices'])
    assert data['meta']['N'] == 8 and data['meta']['M'] == 8


def test_price_at_expiry_is_payoff(client):
    response = client.post('/api/price', json={
        'example': '2', 'alpha0': 0.5, 'N': 4, 'M': 8, 'spots': [1.0, 2.718281828459045], 'time': 1.0,
    })
    values = [p['value'] for p in response.get_json()['prices']]
    assert values == pytest.approx([0.0, 0.0], abs=1e-12)


def test_price_out_of_domain_spot(client):
    response = client.post('/api/price', json={'example': '2', 'N': 4, 'M': 4, 'spots': [5.0]})
    assert response.status_code == 400
    assert not response.get_json()['success']


def test_price_requires_spots(client):
    assert client.post('/api/price', json={'example': '2', 'N': 4, 'M': 4}).status_code == 400


def test_price_rejects_oversized_grid(client):
    response = client.post('/api/price', json={'example': '2', 'N': 100000, 'M': 4, 'spots': [1.5]})
    assert response.status_code == 400
    assert 'exceeds' in response.get_json()['error']


@pytest.mark.parametrize("nodes", ["many", 0, -3, 10 ** 6])
def test_price_rejects_bad_quadrature_nodes(client, nodes):
    response = client.post('/api/price', json={
        'example': '2', 'N': 4, 'M': 4, 'spots': [1.5], 'jacobi_nodes': nodes,
    })
    assert response.status_code == 400
    assert not response.get_json()['success']


def test_convergence_rejects_oversized_legendre_rule(client):
    response = client.post('/api/convergence', json={
        'example': '2', 'N': 4, 'M': 4, 'levels': 1, 'legendre_nodes': 10 ** 6,
    })
    assert response.status_code == 400
    assert 'exceeds' in response.get_json()['error']


def test_price_accepts_numeric_string_nodes(client):
    response = client.post('/api/price', json={
        'example': '2', 'N': 4, 'M': 4, 'spots': [1.5], 'jacobi_nodes': '24',
        'legendre_nodes': 8,
    })
    assert response.status_code == 200


def test_price_rejects_bad_alpha(client):
    response = client.post('/api/price', json={'example': '2', 'alpha0': 'high', 'spots': [1.5]})
    assert response.status_code == 400


def test_convergence_small_ladder(client):
    response = client.post('/api/convergence', json={
        'example': '2', 'alpha0': 0.5, 'N': 4, 'M': 4, 'levels': 2,
    })
    assert response.status_code == 200
    data = response.get_json()
    assert len(data['rows']) == 2
    assert data['rows'][0]['order'] is None
    assert data['rows'][1]['order'] is not None
    assert data['theory_order'] == pytest.approx(1.25)


def test_convergence_rejects_long_ladder(client):
    response = client.post('/api/convergence', json={'example': '1', 'N': 64, 'M': 4, 'levels': 4})
    assert response.status_code == 400


def test_convergence_numerical_failure(client, monkeypatch):
    def broken(config):
        raise NumericalError("use a smaller time step")

    monkeypatch.setattr(pricing_api, 'convergence_study', broken)
    response = client.post('/api/convergence', json={'example': '2', 'N': 4, 'M': 4, 'levels': 1})
    assert response.status_code == 422
    assert 'smaller time step' in response.get_json()['error']
