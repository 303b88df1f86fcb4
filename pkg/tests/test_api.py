import pytest
from fastapi.testclient import TestClient
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app.main import app
from app.core.database import Base, get_db

# Create test database
SQLALCHEMY_DATABASE_URL = "sqlite:///./test.db"
engine = create_engine(SQLALCHEMY_DATABASE_URL, connect_args={"check_same_thread": False})
TestingSessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base.metadata.drop_all(bind=engine)
Base.metadata.create_all(bind=engine)


def override_get_db():
    try:
        db = TestingSessionLocal()
        yield db
    finally:
        db.close()


app.dependency_overrides[get_db] = override_get_db

client = TestClient(app)


def separated(n: int):
    """Every B sample above every A sample"""
    return [i / n for i in range(n)], [2.0 + i / n for i in range(n)]


def test_read_root():
    """Test root endpoint"""
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_health_check():
    """Test health check endpoint"""
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_epsilon():
    response = client.get("/api/epsilon", params={"alpha": 0.1, "n": 1000})
    assert response.status_code == 200
    assert response.json()["epsilon"] == pytest.approx(0.0387023, abs=1e-6)


def test_epsilon_rejects_bad_alpha():
    response = client.get("/api/epsilon", params={"alpha": 2.0, "n": 10})
    assert response.status_code == 400
    assert "alpha" in response.json()["detail"]


def test_bounds_for_separated_samples():
    samples_a, samples_b = separated(1000)
    response = client.post("/api/risk/bounds", json={"samples_a": samples_a, "samples_b": samples_b,
                                                     "p": 0.99, "alpha": 0.1})
    assert response.status_code == 200
    data = response.json()
    assert data["lower"] == pytest.approx(0.9609, abs=1e-4)
    assert data["upper"] == 1.0


def test_bounds_reject_unequal_counts():
    response = client.post("/api/risk/bounds", json={"samples_a": [1.0, 2.0, 3.0], "samples_b": [1.0, 2.0]})
    assert response.status_code == 400


def test_bounds_validate_the_body():
    response = client.post("/api/risk/bounds", json={"samples_a": [1.0], "samples_b": [1.0]})
    assert response.status_code == 422


def test_detect():
    samples_a, samples_b = separated(100)
    params = {"p": 0.99, "gamma": 0.5, "alpha": 0.1, "n": 100}
    response = client.post("/api/risk/detect", json={"samples_a": samples_a, "samples_b": samples_b,
                                                     "params": params})
    assert response.status_code == 200
    assert response.json()["critical"] is True

    response = client.post("/api/risk/detect", json={"samples_a": samples_a, "samples_b": samples_a,
                                                     "params": params})
    assert response.json()["critical"] is False
    assert response.json()["bounds"]["lower"] == 0.0


def test_detect_checks_the_sample_count():
    samples_a, samples_b = separated(10)
    response = client.post("/api/risk/detect", json={"samples_a": samples_a, "samples_b": samples_b,
                                                     "params": {"n": 1000}})
    assert response.status_code == 400
    assert "expected 1000 samples" in response.json()["detail"]


def test_get_benchmark_not_found():
    """Test getting non-existent benchmark run"""
    response = client.get("/api/benchmarks/non-existent-id")
    assert response.status_code == 404
    assert response.json()["detail"] == "Benchmark run not found"


def test_benchmark_lifecycle(quick_corpus, quick_config):
    response = client.post("/api/benchmarks", json={
        "corpus_dir": str(quick_corpus),
        "config": quick_config.model_dump(mode="json"),
        "seed": 3,
    })
    assert response.status_code == 201
    run = response.json()
    assert run["detector"] == "rsr"
    assert run["seed"] == 3
    assert len(run["outcomes"]) == 2

    response = client.get(f"/api/benchmarks/{run['run_id']}")
    assert response.status_code == 200
    assert response.json()["parameters"] == run["parameters"]

    response = client.get("/api/benchmarks", params={"page": 1, "page_size": 10})
    assert response.status_code == 200
    data = response.json()
    assert data["total"] >= 1
    assert run["run_id"] in [item["run_id"] for item in data["runs"]]


def test_benchmark_empty_corpus(tmp_path):
    response = client.post("/api/benchmarks", json={"corpus_dir": str(tmp_path)})
    assert response.status_code == 400
    assert response.json()["detail"] == "no scenarios"


def test_list_benchmarks_page_size_limit():
    response = client.get("/api/benchmarks", params={"page_size": 500})
    assert response.status_code == 422
